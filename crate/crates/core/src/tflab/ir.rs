use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio::{read_wav, write_wav, AudioBuffer, BitDepth};
use crate::error::{Error, Result};

/// Hearing-aid microphone. Ordering is the canonical channel order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mic {
    Iec,
    Front,
    Rear,
}

impl Mic {
    pub const ALL: [Mic; 3] = [Mic::Iec, Mic::Front, Mic::Rear];

    pub fn as_str(self) -> &'static str {
        match self {
            Mic::Iec => "iec",
            Mic::Front => "front",
            Mic::Rear => "rear",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Mic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "i" | "iec" => Ok(Mic::Iec),
            "f" | "front" => Ok(Mic::Front),
            "r" | "rear" => Ok(Mic::Rear),
            other => Err(Error::InvalidArgument(format!("unknown microphone '{other}'"))),
        }
    }
}

/// Parses "i+f", "iec,front", "ifr" style subsets into canonical order.
pub fn parse_mic_subset(s: &str) -> Result<Vec<Mic>> {
    let parts: Vec<&str> = if s.contains(['+', ',']) {
        s.split(['+', ',']).collect()
    } else if s.chars().all(|c| "ifrIFR".contains(c)) {
        s.split("").filter(|p| !p.is_empty()).collect()
    } else {
        vec![s]
    };
    let mut mics: Vec<Mic> = parts
        .into_iter()
        .map(str::parse)
        .collect::<Result<_>>()?;
    mics.sort();
    mics.dedup();
    if mics.is_empty() {
        return Err(Error::InvalidArgument("empty microphone subset".into()));
    }
    Ok(mics)
}

pub const NUM_LOUDSPEAKERS: u8 = 16;

/// One of the 16 equidistant loudspeakers; index 1 faces the listener (0°).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Loudspeaker(u8);

impl Loudspeaker {
    pub const FRONT: Loudspeaker = Loudspeaker(1);

    pub fn new(index: u8) -> Result<Self> {
        if (1..=NUM_LOUDSPEAKERS).contains(&index) {
            Ok(Loudspeaker(index))
        } else {
            Err(Error::InvalidArgument(format!(
                "loudspeaker index {index} outside 1..=16"
            )))
        }
    }

    pub fn all() -> impl Iterator<Item = Loudspeaker> {
        (1..=NUM_LOUDSPEAKERS).map(Loudspeaker)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn azimuth_deg(self) -> f64 {
        (self.0 - 1) as f64 * 360.0 / NUM_LOUDSPEAKERS as f64
    }

    /// Neighbour in the clockwise direction, wrapping 16 -> 1.
    pub fn adjacent(self) -> Loudspeaker {
        Loudspeaker(self.0 % NUM_LOUDSPEAKERS + 1)
    }
}

impl TryFrom<u8> for Loudspeaker {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        Loudspeaker::new(v)
    }
}

impl From<Loudspeaker> for u8 {
    fn from(l: Loudspeaker) -> u8 {
        l.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrKind {
    OwnVoice,
    Hrtf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImpulseResponse {
    taps: Vec<f64>,
    sample_rate: u32,
    kind: IrKind,
}

impl ImpulseResponse {
    pub fn new(taps: Vec<f64>, sample_rate: u32, kind: IrKind) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::EmptyOperand);
        }
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite);
        }
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self {
            taps,
            sample_rate,
            kind,
        })
    }

    pub fn unit_impulse(sample_rate: u32, kind: IrKind) -> Self {
        Self {
            taps: vec![1.0],
            sample_rate,
            kind,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn kind(&self) -> IrKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub(crate) fn with_taps(&self, taps: Vec<f64>) -> Self {
        Self {
            taps,
            sample_rate: self.sample_rate,
            kind: self.kind,
        }
    }
}

/// Sidecar metadata stored next to each IR WAV file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrHeader {
    pub subject_id: String,
    pub mic_id: Mic,
    pub loudspeaker: Option<Loudspeaker>,
    pub kind: IrKind,
}

/// Per-subject own-voice and head-related impulse responses.
#[derive(Clone, Debug)]
pub struct TransferFunctionSet {
    subject_id: String,
    ovtf: BTreeMap<Mic, ImpulseResponse>,
    hrtf: BTreeMap<(Loudspeaker, Mic), ImpulseResponse>,
    sample_rate: u32,
}

impl TransferFunctionSet {
    /// Validates completeness (3 mics, 16 x 3 HRTFs) and a uniform rate.
    pub fn new(
        subject_id: impl Into<String>,
        ovtf: BTreeMap<Mic, ImpulseResponse>,
        hrtf: BTreeMap<(Loudspeaker, Mic), ImpulseResponse>,
    ) -> Result<Self> {
        let subject_id = subject_id.into();
        for mic in Mic::ALL {
            if !ovtf.contains_key(&mic) {
                return Err(Error::MissingTransferFunction(format!(
                    "{subject_id}: own-voice {mic}"
                )));
            }
            for ls in Loudspeaker::all() {
                if !hrtf.contains_key(&(ls, mic)) {
                    return Err(Error::MissingTransferFunction(format!(
                        "{subject_id}: hrtf loudspeaker {} {mic}",
                        ls.index()
                    )));
                }
            }
        }
        let sample_rate = ovtf[&Mic::Iec].sample_rate();
        if let Some(bad) = ovtf
            .values()
            .chain(hrtf.values())
            .find(|ir| ir.sample_rate() != sample_rate)
        {
            return Err(Error::SampleRateMismatch(sample_rate, bad.sample_rate()));
        }
        Ok(Self {
            subject_id,
            ovtf,
            hrtf,
            sample_rate,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn ovtf(&self, mic: Mic) -> Result<&ImpulseResponse> {
        self.ovtf
            .get(&mic)
            .ok_or_else(|| Error::MissingTransferFunction(format!("own-voice {mic}")))
    }

    pub fn hrtf(&self, loudspeaker: Loudspeaker, mic: Mic) -> Result<&ImpulseResponse> {
        self.hrtf.get(&(loudspeaker, mic)).ok_or_else(|| {
            Error::MissingTransferFunction(format!(
                "hrtf loudspeaker {} {mic}",
                loudspeaker.index()
            ))
        })
    }

    /// Writes `ovtf_<mic>.wav` and `hrtf_<ls>_<mic>.wav` (32-bit float) plus
    /// a `.json` sidecar per file into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for (mic, ir) in &self.ovtf {
            self.save_one(dir, &format!("ovtf_{mic}"), ir, *mic, None)?;
        }
        for ((ls, mic), ir) in &self.hrtf {
            self.save_one(dir, &format!("hrtf_{:02}_{mic}", ls.index()), ir, *mic, Some(*ls))?;
        }
        Ok(())
    }

    fn save_one(
        &self,
        dir: &Path,
        stem: &str,
        ir: &ImpulseResponse,
        mic: Mic,
        loudspeaker: Option<Loudspeaker>,
    ) -> Result<()> {
        let audio = AudioBuffer::new(ir.taps().to_vec(), ir.sample_rate())?;
        write_wav(dir.join(format!("{stem}.wav")), &audio, BitDepth::Float32)?;
        let header = IrHeader {
            subject_id: self.subject_id.clone(),
            mic_id: mic,
            loudspeaker,
            kind: ir.kind(),
        };
        let text = serde_json::to_string(&header).expect("header serializes");
        fs::write(dir.join(format!("{stem}.json")), text + "\n")?;
        Ok(())
    }

    /// Loads every `*.wav` with a sidecar from `dir`.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut ovtf = BTreeMap::new();
        let mut hrtf = BTreeMap::new();
        let mut subject: Option<String> = None;
        let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<std::io::Result<_>>()?;
        entries.sort_by_key(|e| e.path());
        for entry in entries {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let header: IrHeader = serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: path.clone(),
                msg: e.to_string(),
            })?;
            let audio = read_wav(path.with_extension("wav"))?;
            let rate = audio.sample_rate();
            let ir = ImpulseResponse::new(audio.into_samples(), rate, header.kind)?;
            subject.get_or_insert_with(|| header.subject_id.clone());
            match (header.kind, header.loudspeaker) {
                (IrKind::OwnVoice, _) => {
                    ovtf.insert(header.mic_id, ir);
                }
                (IrKind::Hrtf, Some(ls)) => {
                    hrtf.insert((ls, header.mic_id), ir);
                }
                (IrKind::Hrtf, None) => {
                    return Err(Error::Parse {
                        path,
                        msg: "hrtf without loudspeaker index".into(),
                    })
                }
            }
        }
        let subject = subject.ok_or_else(|| Error::MissingAsset(dir.display().to_string()))?;
        Self::new(subject, ovtf, hrtf)
    }
}
