use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use super::{ClickPattern, DetectionError, JointProbabilities};
use crate::rng;

/// Tally of click patterns over a number of trials at one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub detectors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    pub trials: u64,
    pub tally: BTreeMap<ClickPattern, u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CountRecord {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.trials == 0 {
            return Err(DetectionError::Integrity("record has zero trials".into()));
        }
        for p in self.tally.keys() {
            if p.len() != self.detectors.len() {
                return Err(DetectionError::PatternLength {
                    expected: self.detectors.len(),
                    got: p.len(),
                });
            }
        }
        let sum: u64 = self.tally.values().sum();
        if sum != self.trials {
            return Err(DetectionError::Integrity(format!(
                "tally sums to {sum} but trials is {}",
                self.trials
            )));
        }
        Ok(())
    }

    pub fn count(&self, pattern: &ClickPattern) -> u64 {
        self.tally.get(pattern).copied().unwrap_or(0)
    }

    pub fn frequency(&self, pattern: &ClickPattern) -> f64 {
        self.count(pattern) as f64 / self.trials as f64
    }

    /// Sum of counts over patterns accepted by `pred`.
    pub fn count_where(&self, pred: impl Fn(&ClickPattern) -> bool) -> u64 {
        self.tally.iter().filter(|(p, _)| pred(p)).map(|(_, c)| c).sum()
    }

    /// Combines tallies taken at the same setting. Seeds survive only when
    /// equal, which keeps the operation associative.
    pub fn merge(&self, other: &CountRecord) -> Result<CountRecord, DetectionError> {
        if self.detectors != other.detectors {
            return Err(DetectionError::Integrity("merging records of different detectors".into()));
        }
        if self.phase.map(f64::to_bits) != other.phase.map(f64::to_bits) {
            return Err(DetectionError::Integrity("merging records at different phases".into()));
        }
        let mut tally = self.tally.clone();
        for (p, c) in &other.tally {
            *tally.entry(p.clone()).or_insert(0) += c;
        }
        Ok(CountRecord {
            detectors: self.detectors.clone(),
            phase: self.phase,
            trials: self.trials + other.trials,
            tally,
            seed: if self.seed == other.seed { self.seed } else { None },
        })
    }
}

/// Multinomial draw of `trials` patterns from `probs` using `rng`, as a
/// chain of conditional binomials.
pub fn sample_counts_with<R: Rng>(
    probs: &JointProbabilities,
    trials: u64,
    rng: &mut R,
) -> Result<BTreeMap<ClickPattern, u64>, DetectionError> {
    if trials == 0 {
        return Err(DetectionError::ZeroTrials);
    }
    let total = probs.total();
    if !((total - 1.0).abs() <= 1e-9) {
        return Err(DetectionError::InvalidProbabilities(format!("sum {total}")));
    }
    let mut tally = BTreeMap::new();
    let mut remaining = trials;
    let mut mass = 1.0;
    let n = probs.probabilities.len();
    for (k, (pattern, &p)) in probs.probabilities.iter().enumerate() {
        let c = if k + 1 == n || remaining == 0 {
            remaining
        } else if mass <= 0.0 {
            0
        } else {
            let q = (p / mass).clamp(0.0, 1.0);
            Binomial::new(remaining, q)
                .map_err(|e| DetectionError::InvalidProbabilities(e.to_string()))?
                .sample(rng)
        };
        tally.insert(pattern.clone(), c);
        remaining -= c;
        mass -= p;
    }
    Ok(tally)
}

/// Reproducible multinomial sample; the stream is derived from `seed`.
pub fn sample_counts(
    probs: &JointProbabilities,
    trials: u64,
    seed: u64,
) -> Result<CountRecord, DetectionError> {
    let tally = sample_counts_with(probs, trials, &mut rng::stream(seed, "counts"))?;
    Ok(CountRecord {
        detectors: probs.detectors.clone(),
        phase: None,
        trials,
        tally,
        seed: Some(seed),
    })
}

/// Like [`sample_counts`], with the trials split over `parts` independent
/// streams sampled on separate threads and merged.
pub fn sample_counts_partitioned(
    probs: &JointProbabilities,
    trials: u64,
    seed: u64,
    parts: usize,
) -> Result<CountRecord, DetectionError> {
    if trials == 0 {
        return Err(DetectionError::ZeroTrials);
    }
    let parts = parts.clamp(1, trials.min(1024) as usize);
    let base = trials / parts as u64;
    let extra = trials % parts as u64;
    let results: Vec<Result<CountRecord, DetectionError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..parts)
            .map(|k| {
                let n = base + u64::from((k as u64) < extra);
                s.spawn(move || {
                    let mut r = rng::stream(seed, &format!("counts/part{k}"));
                    let tally = sample_counts_with(probs, n, &mut r)?;
                    Ok(CountRecord {
                        detectors: probs.detectors.clone(),
                        phase: None,
                        trials: n,
                        tally,
                        seed: Some(seed),
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sampling thread")).collect()
    });
    let mut iter = results.into_iter();
    let mut acc = iter.next().expect("at least one part")?;
    for r in iter {
        acc = acc.merge(&r?)?;
    }
    Ok(acc)
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    phase_phi_radians: Option<f64>,
    pattern_bits: String,
    count: u64,
    trials: u64,
    seed: Option<u64>,
}

const DETECTOR_PREFIX: &str = "# detectors=";

/// Writes records as CSV with columns
/// `phase_phi_radians, pattern_bits, count, trials, seed`.
///
/// Pattern bits follow detector declaration order, which is recorded in a
/// leading `# detectors=` comment line.
pub fn write_records_csv<W: Write>(records: &[CountRecord], mut w: W) -> Result<(), DetectionError> {
    let io = |e: std::io::Error| DetectionError::Io(e.to_string());
    if let Some(first) = records.first() {
        writeln!(w, "{DETECTOR_PREFIX}{}", first.detectors.join(";")).map_err(io)?;
    }
    let mut wr = csv::Writer::from_writer(w);
    for rec in records {
        for (p, c) in &rec.tally {
            wr.serialize(CsvRow {
                phase_phi_radians: rec.phase,
                pattern_bits: p.to_string(),
                count: *c,
                trials: rec.trials,
                seed: rec.seed,
            })
            .map_err(|e| DetectionError::Io(e.to_string()))?;
        }
    }
    wr.flush().map_err(io)
}

/// Parses CSV written by [`write_records_csv`]. Consecutive rows sharing
/// (phase, trials, seed) form one record; each record is integrity-checked.
pub fn read_records_csv<R: Read>(mut r: R) -> Result<Vec<CountRecord>, DetectionError> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|e| DetectionError::Io(e.to_string()))?;
    let detectors: Option<Vec<String>> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .find_map(|l| l.strip_prefix(DETECTOR_PREFIX))
        .map(|s| s.split(';').map(|d| d.trim().to_string()).collect());

    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| DetectionError::Parse {
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(parse_err)?.clone();
    let mut records: Vec<(u64, CountRecord)> = Vec::new();
    let mut raw = csv::StringRecord::new();
    while reader.read_record(&mut raw).map_err(parse_err)? {
        let line = raw.position().map(|p| p.line()).unwrap_or(0);
        let row: CsvRow = raw
            .deserialize(Some(&headers))
            .map_err(|e| DetectionError::Parse { line, message: e.to_string() })?;
        let pattern: ClickPattern = row
            .pattern_bits
            .parse()
            .map_err(|e: DetectionError| DetectionError::Parse { line, message: e.to_string() })?;
        let names = detectors
            .clone()
            .unwrap_or_else(|| (0..pattern.len()).map(|k| format!("d{k}")).collect());
        if names.len() != pattern.len() {
            return Err(DetectionError::Parse {
                line,
                message: format!("pattern {pattern} does not match {} detectors", names.len()),
            });
        }
        let same = records.last().is_some_and(|(_, r)| {
            r.phase.map(f64::to_bits) == row.phase_phi_radians.map(f64::to_bits)
                && r.trials == row.trials
                && r.seed == row.seed
                && !r.tally.contains_key(&pattern)
        });
        if !same {
            records.push((
                line,
                CountRecord {
                    detectors: names,
                    phase: row.phase_phi_radians,
                    trials: row.trials,
                    tally: BTreeMap::new(),
                    seed: row.seed,
                },
            ));
        }
        records.last_mut().expect("pushed").1.tally.insert(pattern, row.count);
    }
    if records.is_empty() {
        return Err(DetectionError::Integrity("no count records".into()));
    }
    records
        .into_iter()
        .map(|(line, rec)| {
            rec.validate().map_err(|e| match e {
                DetectionError::Integrity(m) => {
                    DetectionError::Integrity(format!("record starting at line {line}: {m}"))
                }
                other => other,
            })?;
            Ok(rec)
        })
        .collect()
}

pub fn write_records_json<W: Write>(records: &[CountRecord], w: W) -> Result<(), DetectionError> {
    serde_json::to_writer_pretty(w, records).map_err(|e| DetectionError::Io(e.to_string()))
}

pub fn read_records_json<R: Read>(r: R) -> Result<Vec<CountRecord>, DetectionError> {
    let records: Vec<CountRecord> = serde_json::from_reader(r).map_err(|e| DetectionError::Parse {
        line: e.line() as u64,
        message: e.to_string(),
    })?;
    if records.is_empty() {
        return Err(DetectionError::Integrity("no count records".into()));
    }
    for rec in &records {
        rec.validate()?;
    }
    Ok(records)
}
