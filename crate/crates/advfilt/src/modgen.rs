//! Synthetic modulated-signal dataset generation.
//!
//! Signals are random unit-energy constellation symbols, upsampled at 8
//! samples per symbol and pulse-shaped with a root-raised-cosine filter,
//! then truncated to the block length. Stored dataset examples are
//! normalized to zero mean and unit mean sample power.

use num_complex::Complex64;
use rand::Rng;

use crate::dsp::{conv_full_raw, mean_sample_power, ComplexSignal};
use crate::error::{Error, Result};
use crate::seed;

pub const SAMPLES_PER_SYMBOL: usize = 8;
pub const RRC_ROLLOFF: f64 = 0.35;
pub const RRC_SPAN_SYMBOLS: usize = 8;

/// Modulation formats covered by the synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModClass {
    Bpsk,
    Qpsk,
    Psk8,
    Qam16,
}

impl ModClass {
    pub const ALL: [ModClass; 4] = [ModClass::Bpsk, ModClass::Qpsk, ModClass::Psk8, ModClass::Qam16];

    pub fn id(self) -> u32 {
        match self {
            ModClass::Bpsk => 0,
            ModClass::Qpsk => 1,
            ModClass::Psk8 => 2,
            ModClass::Qam16 => 3,
        }
    }

    pub fn from_id(id: u32) -> Result<Self> {
        Self::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown modulation class id {id}")))
    }

    pub fn label(self) -> &'static str {
        match self {
            ModClass::Bpsk => "bpsk",
            ModClass::Qpsk => "qpsk",
            ModClass::Psk8 => "psk8",
            ModClass::Qam16 => "qam16",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "bpsk" => Ok(ModClass::Bpsk),
            "qpsk" => Ok(ModClass::Qpsk),
            "psk8" => Ok(ModClass::Psk8),
            "qam16" => Ok(ModClass::Qam16),
            other => Err(Error::Config(format!("unknown modulation class '{other}'"))),
        }
    }

    /// Constellation points with unit average symbol energy.
    pub fn constellation(self) -> Vec<Complex64> {
        match self {
            ModClass::Bpsk => vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            ModClass::Qpsk => {
                let r = 1.0 / 2.0f64.sqrt();
                vec![
                    Complex64::new(r, r),
                    Complex64::new(-r, r),
                    Complex64::new(-r, -r),
                    Complex64::new(r, -r),
                ]
            }
            ModClass::Psk8 => (0..8)
                .map(|k| Complex64::from_polar(1.0, std::f64::consts::TAU * k as f64 / 8.0))
                .collect(),
            ModClass::Qam16 => {
                // average energy of {-3,-1,1,3}^2 grid is 10
                let scale = 1.0 / 10.0f64.sqrt();
                let levels = [-3.0, -1.0, 1.0, 3.0];
                let mut points = Vec::with_capacity(16);
                for &re in &levels {
                    for &im in &levels {
                        points.push(Complex64::new(re * scale, im * scale));
                    }
                }
                points
            }
        }
    }
}

/// Root-raised-cosine taps over `span` symbols at `sps` samples/symbol,
/// normalized to unit energy. Tap count is `span * sps + 1`.
pub fn rrc_taps(sps: usize, span: usize, rolloff: f64) -> Vec<f64> {
    let n = span * sps + 1;
    let center = (n - 1) as f64 / 2.0;
    let pi = std::f64::consts::PI;
    let mut taps: Vec<f64> = (0..n)
        .map(|i| {
            // t in symbol periods
            let t = (i as f64 - center) / sps as f64;
            if t.abs() < 1e-12 {
                1.0 + rolloff * (4.0 / pi - 1.0)
            } else if (t.abs() - 1.0 / (4.0 * rolloff)).abs() < 1e-9 {
                (rolloff / 2.0f64.sqrt())
                    * ((1.0 + 2.0 / pi) * (pi / (4.0 * rolloff)).sin()
                        + (1.0 - 2.0 / pi) * (pi / (4.0 * rolloff)).cos())
            } else {
                let num = (pi * t * (1.0 - rolloff)).sin()
                    + 4.0 * rolloff * t * (pi * t * (1.0 + rolloff)).cos();
                let den = pi * t * (1.0 - (4.0 * rolloff * t).powi(2));
                num / den
            }
        })
        .collect();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    let scale = 1.0 / energy.sqrt();
    for t in taps.iter_mut() {
        *t *= scale;
    }
    taps
}

/// Generates one pulse-shaped baseband block of `d` samples for class `k`.
///
/// The symbol stream and the initial phase (0 or pi/4) come from a stream
/// keyed by `stream_seed`, so identical arguments reproduce the block
/// bit for bit.
pub fn generate_signal(k: ModClass, d: usize, stream_seed: u64) -> Result<ComplexSignal> {
    if d < 32 {
        return Err(Error::InvalidArgument(format!(
            "signal length must be at least 32 samples, got {d}"
        )));
    }
    let mut rng = seed::rng(&[0x5161, stream_seed]);
    let phase = if rng.random::<bool>() {
        Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)
    } else {
        Complex64::new(1.0, 0.0)
    };
    let constellation = k.constellation();
    let n_sym = (d + RRC_SPAN_SYMBOLS * SAMPLES_PER_SYMBOL) / SAMPLES_PER_SYMBOL + 2;
    let mut upsampled = vec![Complex64::new(0.0, 0.0); n_sym * SAMPLES_PER_SYMBOL];
    for s in 0..n_sym {
        let sym = constellation[rng.random_range(0..constellation.len())];
        upsampled[s * SAMPLES_PER_SYMBOL] = sym * phase;
    }
    let taps: Vec<Complex64> = rrc_taps(SAMPLES_PER_SYMBOL, RRC_SPAN_SYMBOLS, RRC_ROLLOFF)
        .into_iter()
        .map(|t| Complex64::new(t, 0.0))
        .collect();
    let shaped = conv_full_raw(&upsampled, &taps);
    // skip the leading filter transient
    let offset = RRC_SPAN_SYMBOLS * SAMPLES_PER_SYMBOL / 2;
    ComplexSignal::new(shaped[offset..offset + d].to_vec())
}

/// Shifts to zero complex mean and rescales to unit mean sample power.
pub fn normalize_input(s: &ComplexSignal) -> Result<ComplexSignal> {
    let n = s.len() as f64;
    let mean = s.iter().sum::<Complex64>() / n;
    let centered: Vec<Complex64> = s.iter().map(|x| x - mean).collect();
    let power = mean_sample_power(&centered);
    if power == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot normalize a constant signal".into(),
        ));
    }
    let scale = 1.0 / power.sqrt();
    ComplexSignal::new(centered.into_iter().map(|x| x.scale(scale)).collect())
}

/// A balanced, seeded dataset of normalized signals with an 80/20
/// train/test split per class.
#[derive(Debug, Clone)]
pub struct Dataset {
    examples: Vec<(ComplexSignal, ModClass)>,
    train_idx: Vec<usize>,
    test_idx: Vec<usize>,
    classes: Vec<ModClass>,
    signal_len: usize,
    pub seed: u64,
}

impl Dataset {
    pub fn classes(&self) -> &[ModClass] {
        &self.classes
    }

    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn example(&self, idx: usize) -> (&ComplexSignal, ModClass) {
        let (s, k) = &self.examples[idx];
        (s, *k)
    }

    pub fn train_indices(&self) -> &[usize] {
        &self.train_idx
    }

    pub fn test_indices(&self) -> &[usize] {
        &self.test_idx
    }

    pub fn train(&self) -> Vec<(&ComplexSignal, ModClass)> {
        self.train_idx.iter().map(|&i| self.example(i)).collect()
    }

    pub fn test(&self) -> Vec<(&ComplexSignal, ModClass)> {
        self.test_idx.iter().map(|&i| self.example(i)).collect()
    }

    /// Train examples restricted to one class.
    pub fn train_of_class(&self, k: ModClass) -> Vec<(&ComplexSignal, ModClass)> {
        self.train()
            .into_iter()
            .filter(|(_, kk)| *kk == k)
            .collect()
    }

    /// Test examples restricted to one class.
    pub fn test_of_class(&self, k: ModClass) -> Vec<(&ComplexSignal, ModClass)> {
        self.test().into_iter().filter(|(_, kk)| *kk == k).collect()
    }

    /// Exact per-class counts in both splits; the training contract
    /// requires them to be equal across classes.
    pub fn is_balanced(&self) -> bool {
        let count = |idx: &[usize], k: ModClass| {
            idx.iter().filter(|&&i| self.examples[i].1 == k).count()
        };
        let train0 = count(&self.train_idx, self.classes[0]);
        let test0 = count(&self.test_idx, self.classes[0]);
        self.classes.iter().all(|&k| {
            count(&self.train_idx, k) == train0 && count(&self.test_idx, k) == test0
        })
    }

    /// Rebuilds the deterministic 80/20 per-class split from example order;
    /// used both at construction and after loading from disk.
    fn assign_split(examples: &[(ComplexSignal, ModClass)], classes: &[ModClass]) -> (Vec<usize>, Vec<usize>) {
        let mut train_idx = Vec::new();
        let mut test_idx = Vec::new();
        for &k in classes {
            let of_class: Vec<usize> = examples
                .iter()
                .enumerate()
                .filter(|(_, (_, kk))| *kk == k)
                .map(|(i, _)| i)
                .collect();
            let n_train = of_class.len() * 4 / 5;
            train_idx.extend_from_slice(&of_class[..n_train]);
            test_idx.extend_from_slice(&of_class[n_train..]);
        }
        (train_idx, test_idx)
    }

    fn from_examples(
        examples: Vec<(ComplexSignal, ModClass)>,
        classes: Vec<ModClass>,
        signal_len: usize,
        seed: u64,
    ) -> Self {
        let (train_idx, test_idx) = Self::assign_split(&examples, &classes);
        Self {
            examples,
            train_idx,
            test_idx,
            classes,
            signal_len,
            seed,
        }
    }
}

/// Builds a balanced dataset of `per_class` normalized signals per class.
///
/// Each example derives its own stream from `(seed, class, index)`, so
/// generation is order-independent and reproducible.
pub fn make_dataset(
    classes: &[ModClass],
    per_class: usize,
    d: usize,
    seed: u64,
) -> Result<Dataset> {
    if per_class < 2 {
        return Err(Error::InvalidArgument(
            "per_class must be at least 2 for a train/test split".into(),
        ));
    }
    if classes.is_empty() {
        return Err(Error::InvalidArgument("class list must be nonempty".into()));
    }
    let mut examples = Vec::with_capacity(classes.len() * per_class);
    for &k in classes {
        for i in 0..per_class {
            let stream = seed::mix(&[seed, k.id() as u64, i as u64]);
            let raw = generate_signal(k, d, stream)?;
            examples.push((normalize_input(&raw)?, k));
        }
    }
    Ok(Dataset::from_examples(examples, classes.to_vec(), d, seed))
}

pub const AFDS_MAGIC: &[u8; 4] = b"AFDS";
pub const AFDS_VERSION: u32 = 1;

/// Serializes the dataset as the flat little-endian AFDS format:
/// magic, version, K, d, count, then class id + interleaved re/im f64
/// pairs per example.
pub fn write_afds(dataset: &Dataset, path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + dataset.len() * (4 + 16 * dataset.signal_len()));
    buf.extend_from_slice(AFDS_MAGIC);
    buf.extend_from_slice(&AFDS_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dataset.classes().len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.signal_len() as u32).to_le_bytes());
    buf.extend_from_slice(&(dataset.len() as u64).to_le_bytes());
    for i in 0..dataset.len() {
        let (s, k) = dataset.example(i);
        buf.extend_from_slice(&k.id().to_le_bytes());
        for x in s.iter() {
            buf.extend_from_slice(&x.re.to_le_bytes());
            buf.extend_from_slice(&x.im.to_le_bytes());
        }
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Format("unexpected end of file".into()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_afds(path: &std::path::Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader::new(&bytes);
    let magic = r.take(4)?;
    if magic != AFDS_MAGIC {
        return Err(Error::Format(format!(
            "bad dataset magic {:?} in {}, expected {:?}",
            magic,
            path.display(),
            AFDS_MAGIC
        )));
    }
    let version = r.u32()?;
    if version != AFDS_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset version {version}, expected {AFDS_VERSION}"
        )));
    }
    let num_classes = r.u32()? as usize;
    let d = r.u32()? as usize;
    let count = r.u64()? as usize;
    let mut examples = Vec::with_capacity(count);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..count {
        let k = ModClass::from_id(r.u32()?)?;
        seen.insert(k);
        let mut samples = Vec::with_capacity(d);
        for _ in 0..d {
            let re = r.f64()?;
            let im = r.f64()?;
            samples.push(Complex64::new(re, im));
        }
        examples.push((ComplexSignal::new(samples)?, k));
    }
    if seen.len() != num_classes {
        return Err(Error::Format(format!(
            "dataset header claims {num_classes} classes but {} are present",
            seen.len()
        )));
    }
    let classes: Vec<ModClass> = seen.into_iter().collect();
    Ok(Dataset::from_examples(examples, classes, d, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constellations_have_unit_energy() {
        for k in ModClass::ALL {
            let pts = k.constellation();
            let energy: f64 = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / pts.len() as f64;
            assert!((energy - 1.0).abs() < 1e-12, "{:?}", k);
        }
    }

    #[test]
    fn bpsk_and_qpsk_points() {
        assert_eq!(
            ModClass::Bpsk.constellation(),
            vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)]
        );
        let r = 1.0 / 2.0f64.sqrt();
        for p in ModClass::Qpsk.constellation() {
            assert!((p.re.abs() - r).abs() < 1e-15);
            assert!((p.im.abs() - r).abs() < 1e-15);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_signal(ModClass::Qam16, 128, 42).unwrap();
        let b = generate_signal(ModClass::Qam16, 128, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = generate_signal(ModClass::Qam16, 128, 43).unwrap();
        assert_ne!(a.as_slice(), c.as_slice());
    }

    #[test]
    fn short_blocks_are_rejected() {
        assert!(generate_signal(ModClass::Bpsk, 16, 1).is_err());
    }

    #[test]
    fn normalize_shifts_and_scales() {
        let s = ComplexSignal::new(vec![
            Complex64::new(1.5, 0.5),
            Complex64::new(-0.5, 0.5),
        ])
        .unwrap();
        let n = normalize_input(&s).unwrap();
        assert!((n[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((n[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn normalize_postconditions_and_idempotence() {
        let s = generate_signal(ModClass::Psk8, 128, 7).unwrap();
        let n = normalize_input(&s).unwrap();
        let mean = n.iter().sum::<Complex64>() / n.len() as f64;
        assert!(mean.norm() < 1e-12);
        assert!((mean_sample_power(&n) - 1.0).abs() < 1e-12);
        let again = normalize_input(&n).unwrap();
        let diff = n
            .iter()
            .zip(again.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-12);
    }

    #[test]
    fn normalize_rejects_constant_signal() {
        let s = ComplexSignal::new(vec![Complex64::new(2.0, 1.0); 8]).unwrap();
        assert!(normalize_input(&s).is_err());
    }

    #[test]
    fn dataset_counts_and_split() {
        let ds = make_dataset(&ModClass::ALL, 10, 64, 5).unwrap();
        assert_eq!(ds.len(), 40);
        assert_eq!(ds.train_indices().len(), 32);
        assert_eq!(ds.test_indices().len(), 8);
        assert!(ds.is_balanced());
        // disjoint split covering everything
        let mut all: Vec<usize> = ds
            .train_indices()
            .iter()
            .chain(ds.test_indices())
            .copied()
            .collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 40);
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = make_dataset(&ModClass::ALL, 3, 64, 11).unwrap();
        let b = make_dataset(&ModClass::ALL, 3, 64, 11).unwrap();
        for i in 0..a.len() {
            assert_eq!(a.example(i).0.as_slice(), b.example(i).0.as_slice());
            assert_eq!(a.example(i).1, b.example(i).1);
        }
    }

    #[test]
    fn stored_examples_are_normalized() {
        let ds = make_dataset(&ModClass::ALL, 4, 64, 3).unwrap();
        for i in 0..ds.len() {
            let (s, _) = ds.example(i);
            let mean = s.iter().sum::<Complex64>() / s.len() as f64;
            assert!(mean.norm() < 1e-12);
            assert!((mean_sample_power(s) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn seeds_produce_distinct_signals() {
        let mut signatures = std::collections::BTreeSet::new();
        for seed in 0..100u64 {
            let s = generate_signal(ModClass::Qpsk, 64, seed).unwrap();
            let sig: Vec<u64> = s.iter().flat_map(|x| [x.re.to_bits(), x.im.to_bits()]).collect();
            signatures.insert(sig);
        }
        assert_eq!(signatures.len(), 100);
    }

    #[test]
    fn afds_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.afds");
        let ds = make_dataset(&ModClass::ALL, 4, 64, 9).unwrap();
        write_afds(&ds, &path).unwrap();
        let loaded = read_afds(&path).unwrap();
        assert_eq!(loaded.len(), ds.len());
        assert_eq!(loaded.signal_len(), 64);
        assert_eq!(loaded.classes(), ds.classes());
        for i in 0..ds.len() {
            assert_eq!(loaded.example(i).0.as_slice(), ds.example(i).0.as_slice());
            assert_eq!(loaded.example(i).1, ds.example(i).1);
        }
        assert_eq!(loaded.train_indices(), ds.train_indices());
    }

    #[test]
    fn afds_rejects_corrupt_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.afds");
        std::fs::write(&path, b"NOPE0000").unwrap();
        match read_afds(&path) {
            Err(Error::Format(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {:?}", other.map(|_| ())),
        }
    }
}
