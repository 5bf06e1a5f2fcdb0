use std::fmt;

use crate::error::{FrontendError, Result};

/// The nine categorical context features attached to every sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelField {
    Gender,
    Age,
    SocialRank,
    Individuality,
    Condition,
    Relationship,
    NCompanion,
    Distance,
    Part,
}

const GENDER: [&str; 3] = ["hanashika", "male", "female"];
const AGE: [&str; 5] = ["hanashika", "child", "young", "middle-aged", "old"];
const SOCIAL_RANK: [&str; 9] = [
    "hanashika",
    "samurai",
    "artisan",
    "merchant",
    "other_townsperson",
    "countryperson",
    "with_other_dialect",
    "modern",
    "other",
];
const INDIVIDUALITY: [&str; 2] = ["hanashika", "fool"];
const CONDITION: [&str; 60] = [
    "neutral",
    "admiring",
    "admonishing",
    "affected",
    "angry",
    "begging",
    "buttering_up",
    "cheerful",
    "complaining",
    "confident",
    "confused",
    "convinced",
    "crying",
    "depressed",
    "drinking",
    "drunk",
    "eating",
    "encouraging",
    "excited",
    "feeling_sick",
    "sleepy",
    "feeling_sorry",
    "finding_it_easier_than_expected",
    "freezing",
    "frustrated",
    "ghostly",
    "happy",
    "hesitating",
    "interested",
    "justifying",
    "kakegoe",
    "loud_voice",
    "laughing",
    "leaning_on_someone",
    "lecturing",
    "looking_down",
    "panicked",
    "pet-directed_speech",
    "playing_dumb",
    "putting_up_with",
    "rebellious",
    "refusing",
    "sad",
    "scared",
    "seducing",
    "shocked",
    "shouting",
    "sketchy",
    "small_voice",
    "soothing",
    "straining",
    "surprised",
    "suspicious",
    "swaggering",
    "teasing",
    "telling_off",
    "tired",
    "trying_to_remember",
    "underestimating",
    "unpleasant",
];
const RELATIONSHIP: [&str; 5] = ["hanashika", "narrative", "soliloquy", "superior", "inferior"];
const N_COMPANION: [&str; 5] = ["hanashika", "narrative", "soliloquy", "one", "two_or_more"];
const DISTANCE: [&str; 5] = ["hanashika", "narrative", "near", "middle", "far"];
const PART: [&str; 3] = ["makura", "main_part", "ochi"];

impl LabelField {
    pub const ALL: [LabelField; 9] = [
        LabelField::Gender,
        LabelField::Age,
        LabelField::SocialRank,
        LabelField::Individuality,
        LabelField::Condition,
        LabelField::Relationship,
        LabelField::NCompanion,
        LabelField::Distance,
        LabelField::Part,
    ];

    /// Character attribute fields: role (gender, age, rank) and individuality.
    pub const ATTR: [LabelField; 4] =
        [LabelField::Gender, LabelField::Age, LabelField::SocialRank, LabelField::Individuality];

    pub fn key(self) -> &'static str {
        match self {
            LabelField::Gender => "gender",
            LabelField::Age => "age",
            LabelField::SocialRank => "social_rank",
            LabelField::Individuality => "individuality",
            LabelField::Condition => "condition",
            LabelField::Relationship => "relationship",
            LabelField::NCompanion => "n_companion",
            LabelField::Distance => "distance",
            LabelField::Part => "part",
        }
    }

    pub fn from_key(key: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.key() == key)
            .ok_or_else(|| FrontendError::UnknownField(key.to_string()))
    }

    /// Multi-word values use underscores; parsing also accepts spaces.
    pub fn vocabulary(self) -> &'static [&'static str] {
        match self {
            LabelField::Gender => &GENDER,
            LabelField::Age => &AGE,
            LabelField::SocialRank => &SOCIAL_RANK,
            LabelField::Individuality => &INDIVIDUALITY,
            LabelField::Condition => &CONDITION,
            LabelField::Relationship => &RELATIONSHIP,
            LabelField::NCompanion => &N_COMPANION,
            LabelField::Distance => &DISTANCE,
            LabelField::Part => &PART,
        }
    }

    pub fn cardinality(self) -> usize {
        self.vocabulary().len()
    }

    pub fn index_of(self, value: &str) -> Result<usize> {
        let norm = value.trim().replace(' ', "_");
        self.vocabulary()
            .iter()
            .position(|v| *v == norm)
            .ok_or_else(|| FrontendError::UnknownLabel { field: self.key(), value: value.to_string() })
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// One value per field, stored as vocabulary indices. The default is the
/// first entry of every vocabulary (narration, neutral, makura).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ContextLabels {
    values: [usize; 9],
}

impl ContextLabels {
    pub fn get(&self, field: LabelField) -> &'static str {
        field.vocabulary()[self.values[field.slot()]]
    }

    pub fn index(&self, field: LabelField) -> usize {
        self.values[field.slot()]
    }

    pub fn set(&mut self, field: LabelField, value: &str) -> Result<()> {
        self.values[field.slot()] = field.index_of(value)?;
        Ok(())
    }

    pub fn with(mut self, field: LabelField, value: &str) -> Result<Self> {
        self.set(field, value)?;
        Ok(self)
    }

    pub fn set_index(&mut self, field: LabelField, index: usize) -> Result<()> {
        if index >= field.cardinality() {
            return Err(FrontendError::UnknownLabel { field: field.key(), value: index.to_string() });
        }
        self.values[field.slot()] = index;
        Ok(())
    }

    /// Parses `key=value,key=value`; omitted keys keep their default.
    pub fn parse(text: &str) -> Result<Self> {
        let mut labels = Self::default();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| FrontendError::UnknownField(item.to_string()))?;
            labels.set(LabelField::from_key(k.trim())?, v)?;
        }
        Ok(labels)
    }
}

impl fmt::Display for ContextLabels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, field) in LabelField::ALL.into_iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}={}", field.key(), self.get(field))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_sizes() {
        let sizes: Vec<usize> = LabelField::ALL.iter().map(|f| f.cardinality()).collect();
        assert_eq!(sizes, vec![3, 5, 9, 2, 60, 5, 5, 5, 3]);
        for f in LabelField::ALL {
            let mut v = f.vocabulary().to_vec();
            v.sort();
            v.dedup();
            assert_eq!(v.len(), f.cardinality(), "{f:?} has duplicates");
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        let l = ContextLabels::parse("gender=female, condition=small voice,part=ochi").unwrap();
        assert_eq!(l.get(LabelField::Condition), "small_voice");
        assert_eq!(l.get(LabelField::Age), "hanashika");
        assert_eq!(ContextLabels::parse(&l.to_string()).unwrap(), l);
        assert!(ContextLabels::parse("mood=happy").is_err());
        assert!(ContextLabels::parse("gender=robot").is_err());
        assert!(ContextLabels::parse("gender").is_err());
    }
}
