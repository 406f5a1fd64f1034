//! Class labels, noise types and dataset splits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ten command words, in label-index order.
pub const KEYWORDS: [&str; 10] = [
    "yes", "no", "up", "down", "left", "right", "on", "off", "stop", "go",
];

pub const NUM_CLASSES: usize = 12;

/// One of the twelve recognition targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassLabel {
    /// Index into [`KEYWORDS`].
    Keyword(u8),
    /// Any other spoken word.
    Filler,
    /// No own voice at all.
    Ambient,
}

impl ClassLabel {
    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES).map(|i| ClassLabel::from_index(i).expect("in range"))
    }

    pub fn index(self) -> usize {
        match self {
            ClassLabel::Keyword(k) => k as usize,
            ClassLabel::Filler => 10,
            ClassLabel::Ambient => 11,
        }
    }

    pub fn from_index(index: usize) -> Result<Self> {
        match index {
            0..=9 => Ok(ClassLabel::Keyword(index as u8)),
            10 => Ok(ClassLabel::Filler),
            11 => Ok(ClassLabel::Ambient),
            _ => Err(Error::LabelOutOfRange(index)),
        }
    }

    /// Maps a spoken word to its class; anything outside [`KEYWORDS`] is filler.
    pub fn from_word(word: &str) -> Self {
        KEYWORDS
            .iter()
            .position(|k| *k == word)
            .map_or(ClassLabel::Filler, |k| ClassLabel::Keyword(k as u8))
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::Keyword(k) => KEYWORDS[k as usize],
            ClassLabel::Filler => "filler",
            ClassLabel::Ambient => "ambient",
        }
    }

    pub fn has_speech(self) -> bool {
        self != ClassLabel::Ambient
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "filler" => Ok(ClassLabel::Filler),
            "ambient" => Ok(ClassLabel::Ambient),
            w => match ClassLabel::from_word(w) {
                ClassLabel::Filler => Err(Error::InvalidArgument(format!("unknown class {w:?}"))),
                k => Ok(k),
            },
        }
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseType {
    Babble,
    Music,
    Ssn,
    Interferer,
    Tv,
}

impl NoiseType {
    pub const ALL: [NoiseType; 5] = [
        NoiseType::Babble,
        NoiseType::Music,
        NoiseType::Ssn,
        NoiseType::Interferer,
        NoiseType::Tv,
    ];
    /// Types that appear in training.
    pub const SEEN: [NoiseType; 3] = [NoiseType::Babble, NoiseType::Music, NoiseType::Ssn];

    pub fn is_seen(self) -> bool {
        Self::SEEN.contains(&self)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseType::Babble => "babble",
            NoiseType::Music => "music",
            NoiseType::Ssn => "ssn",
            NoiseType::Interferer => "interferer",
            NoiseType::Tv => "tv",
        }
    }
}

impl fmt::Display for NoiseType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NoiseType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown noise type {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One value per split.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BySplit<T> {
    pub train: T,
    pub val: T,
    pub test: T,
}

impl<T> BySplit<T> {
    pub fn get(&self, split: Split) -> &T {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut T {
        match split {
            Split::Train => &mut self.train,
            Split::Val => &mut self.val,
            Split::Test => &mut self.test,
        }
    }
}
