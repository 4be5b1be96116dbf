use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TagSet;
use crate::error::{Error, Result};

/// The `tags` generator: the tag strings in a seeded random order, joined by
/// `", "`.
pub fn tags_to_text(tags: &TagSet, rng_seed: u64) -> Result<String> {
    if tags.is_empty() {
        return Err(Error::NoTags);
    }
    let mut shuffled: Vec<&str> = tags.tags().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    shuffled.shuffle(&mut rng);
    Ok(shuffled.join(", "))
}
