use ndarray::Array1;
use rand::Rng;

/// Replaces the text feature with `null` with probability `p`.
///
/// One uniform draw is consumed per call whether or not text is present, so
/// the decision stream depends only on the number of examples seen. A missing
/// text (`None`) always resolves to `null`. The flag reports whether the draw
/// dropped the text.
pub fn text_dropout<'a, T, R: Rng>(
    text: Option<&'a Array1<T>>,
    p: f64,
    null: &'a Array1<T>,
    rng: &mut R,
) -> (&'a Array1<T>, bool) {
    let drop = rng.random::<f64>() < p;
    match text {
        Some(t) if !drop => (t, false),
        _ => (null, drop),
    }
}
