use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{Category, TagSet};
use crate::error::{Error, Result};

const INSTRUMENTS: [&str; 41] = [
    "acoustic guitar",
    "electric guitar",
    "bass guitar",
    "synth bass",
    "double bass",
    "piano",
    "electric piano",
    "organ",
    "synthesizer keyboard",
    "synth pad",
    "synth lead",
    "drumset",
    "electronic drumset",
    "drum machine",
    "percussion",
    "hand claps",
    "shaker",
    "tambourine",
    "congas",
    "violin",
    "viola",
    "cello",
    "strings",
    "harp",
    "trumpet",
    "trombone",
    "saxophone",
    "clarinet",
    "flute",
    "french horn",
    "brass section",
    "choir",
    "male vocals",
    "female vocals",
    "rap vocals",
    "backing vocals",
    "banjo",
    "mandolin",
    "ukulele",
    "harmonica",
    "accordion",
];

const GENRES: [&str; 20] = [
    "pop",
    "rock",
    "hip hop",
    "electronic",
    "dance",
    "r&b",
    "jazz",
    "blues",
    "country",
    "folk",
    "classical",
    "metal",
    "punk",
    "reggae",
    "latin",
    "soul",
    "funk",
    "ambient",
    "indie",
    "world",
];

const MOODS: [&str; 28] = [
    "happy",
    "sad",
    "energetic",
    "calm",
    "romantic",
    "dark",
    "uplifting",
    "melancholic",
    "aggressive",
    "dreamy",
    "playful",
    "epic",
    "tense",
    "relaxed",
    "frantic",
    "dynamic",
    "hopeful",
    "nostalgic",
    "peaceful",
    "angry",
    "mysterious",
    "sentimental",
    "groovy",
    "triumphant",
    "somber",
    "carefree",
    "intense",
    "sensual",
];

/// Tagger vocabulary, one list per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub genre: Vec<String>,
    pub mood: Vec<String>,
    pub instrument: Vec<String>,
}

impl Default for Vocabulary {
    /// 41 instrument, 20 genre and 28 mood tags.
    fn default() -> Self {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            genre: own(&GENRES),
            mood: own(&MOODS),
            instrument: own(&INSTRUMENTS),
        }
    }
}

impl Vocabulary {
    pub fn tags(&self, category: Category) -> &[String] {
        match category {
            Category::Genre => &self.genre,
            Category::Mood => &self.mood,
            Category::Instrument => &self.instrument,
        }
    }

    pub fn len(&self) -> usize {
        self.genre.len() + self.mood.len() + self.instrument.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn category_of(&self, tag: &str) -> Option<Category> {
        Category::PRIORITY
            .into_iter()
            .find(|&c| self.tags(c).iter().any(|t| t == tag))
    }

    /// Every `(tag, category)` pair, categories interleaved round-robin so
    /// that any prefix spans all three categories.
    pub fn interleaved(&self) -> Vec<(String, Category)> {
        let longest = Category::PRIORITY
            .iter()
            .map(|&c| self.tags(c).len())
            .max()
            .unwrap_or(0);
        let mut out = Vec::with_capacity(self.len());
        for i in 0..longest {
            for c in Category::PRIORITY {
                if let Some(t) = self.tags(c).get(i) {
                    out.push((t.clone(), c));
                }
            }
        }
        out
    }

    /// Checks that every prediction uses a tag from its declared category.
    pub fn validate(&self, tags: &TagSet) -> Result<()> {
        let lookup: HashMap<&str, Category> = Category::PRIORITY
            .into_iter()
            .flat_map(|c| self.tags(c).iter().map(move |t| (t.as_str(), c)))
            .collect();
        for p in &tags.predictions {
            match lookup.get(p.tag.as_str()) {
                Some(&c) if c == p.category => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "tag `{}` is not a {} tag in the vocabulary",
                        p.tag, p.category
                    )))
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tagtext::TagPrediction;

    #[test]
    fn default_sizes() {
        let v = Vocabulary::default();
        assert_eq!(v.instrument.len(), 41);
        assert_eq!(v.genre.len(), 20);
        assert_eq!(v.mood.len(), 28);
        assert_eq!(v.len(), 89);
    }

    #[test]
    fn default_tags_unique_and_comma_free() {
        let v = Vocabulary::default();
        let all = v.interleaved();
        let mut names: Vec<_> = all.iter().map(|(t, _)| t.as_str()).collect();
        assert!(names.iter().all(|t| !t.contains(',')));
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 89);
    }

    #[test]
    fn interleaving_starts_round_robin() {
        let v = Vocabulary::default();
        let cats: Vec<_> = v.interleaved().iter().take(3).map(|(_, c)| *c).collect();
        assert_eq!(cats, Category::PRIORITY.to_vec());
    }

    #[test]
    fn validate_checks_category() {
        let v = Vocabulary::default();
        let ok = TagSet::new("t", vec![TagPrediction::new("pop", Category::Genre, 0.5)]).unwrap();
        assert!(v.validate(&ok).is_ok());
        let wrong = TagSet::new("t", vec![TagPrediction::new("pop", Category::Mood, 0.5)]).unwrap();
        assert!(v.validate(&wrong).is_err());
    }
}
