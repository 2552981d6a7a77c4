//! Batch experiments: dataset ingestion, normalization, partitioning across
//! parties, the λ × (σ_r², σ_β²) × method grid, and report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::engine::{AlphaChoice, OpeningLedger, Session, SessionConfig};
use crate::error::{Error, Result};
use crate::privacy_cost::{leakage_bound, sigma_x_estimate, LeakageScenario};
use crate::regression::{
    assemble_system, local_aggregate, mse, plaintext_system, share_aggregates, PartyDataset, PriorSpec,
    RegressionConfig,
};
use crate::sharing::grid_alphas;
use crate::solver::{solve_plain, solve_secure, Method};

/// Label attached to every report: all σ parameters are variances.
pub const SIGMA_CONVENTION: &str = "sigma_r2 and sigma_beta2 are variances (sigma^2)";
pub const PARTITIONING: &str =
    "rows shuffled per repeat; floor(train_frac * rows) training rows dealt round-robin to parties";

/// A numeric table with the target in the last column.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Reads a headered, comma-separated numeric table. The last column is the
/// target. Row numbers in errors are one-based file lines.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    parse_csv(file)
}

pub fn parse_csv<R: std::io::Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Data(format!("header: {e}")))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Data("empty file: missing header".into()));
    }
    if header.len() < 2 {
        return Err(Error::Data("need at least one feature column and a target column".into()));
    }
    let cols = header.len();
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| Error::Data(format!("row {line}: {e}")))?;
        if record.len() != cols {
            return Err(Error::Data(format!("row {line}: expected {cols} columns, found {}", record.len())));
        }
        let mut values = Vec::with_capacity(cols);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("row {line}, column {}: non-numeric value {cell:?}", c + 1)))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {line}, column {}: non-finite value", c + 1)));
            }
            values.push(v);
        }
        targets.push(values.pop().expect("at least two columns"));
        features.push(values);
    }
    if targets.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let mut names: Vec<String> = header.iter().map(str::to_owned).collect();
    let target_name = names.pop().expect("at least two columns");
    Ok(Dataset { feature_names: names, target_name, features, targets })
}

/// Per-column minimum and range, features then target.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    min: Vec<f64>,
    range: Vec<f64>,
}

impl MinMax {
    pub fn fit(data: &Dataset, rows: impl IntoIterator<Item = usize>) -> Self {
        let cols = data.num_features() + 1;
        let mut lo = vec![f64::INFINITY; cols];
        let mut hi = vec![f64::NEG_INFINITY; cols];
        for r in rows {
            let values = data.features[r].iter().chain(std::iter::once(&data.targets[r]));
            for (c, &v) in values.enumerate() {
                lo[c] = lo[c].min(v);
                hi[c] = hi[c].max(v);
            }
        }
        let range = lo.iter().zip(&hi).map(|(l, h)| h - l).collect();
        Self { min: lo, range }
    }

    fn scale(&self, c: usize, v: f64) -> f64 {
        if self.range[c] > 0.0 {
            (v - self.min[c]) / self.range[c]
        } else {
            0.0
        }
    }

    pub fn apply_row(&self, features: &[f64], target: f64) -> (Vec<f64>, f64) {
        let f = features.iter().enumerate().map(|(c, &v)| self.scale(c, v)).collect();
        (f, self.scale(features.len(), target))
    }
}

/// Min-max scaling of every column into `[0, 1]` over the whole dataset;
/// constant columns become zero.
pub fn normalize(data: &Dataset) -> Dataset {
    let mm = MinMax::fit(data, 0..data.rows());
    let (features, targets) = data.features.iter().zip(&data.targets).map(|(f, &y)| mm.apply_row(f, y)).unzip();
    Dataset { features, targets, ..data.clone() }
}

/// Appends the constant-one intercept feature.
pub fn with_intercept(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.push(1.0);
    v
}

/// Training parties plus the held-out rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub parties: Vec<PartyDataset>,
    pub test_features: Vec<Vec<f64>>,
    pub test_targets: Vec<f64>,
}

/// Shuffled row indices split into `(train, test)`.
pub fn shuffled_split(rows: usize, train_frac: f64, rng: &mut ChaCha20Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction must be in (0, 1), got {train_frac}")));
    }
    let mut idx: Vec<usize> = (0..rows).collect();
    idx.shuffle(rng);
    let train = (train_frac * rows as f64).floor() as usize;
    let test = idx.split_off(train);
    Ok((idx, test))
}

/// Shuffles, splits and deals training rows round-robin. Rows are used as
/// given; normalization and the intercept are the caller's business.
pub fn split_and_partition(
    data: &Dataset,
    parties: usize,
    train_frac: f64,
    rng: &mut ChaCha20Rng,
) -> Result<Partition> {
    let (train, test) = shuffled_split(data.rows(), train_frac, rng)?;
    partition_rows(data, parties, &train, &test, |f, y| (f.to_vec(), y))
}

fn partition_rows(
    data: &Dataset,
    parties: usize,
    train: &[usize],
    test: &[usize],
    transform: impl Fn(&[f64], f64) -> (Vec<f64>, f64),
) -> Result<Partition> {
    if parties == 0 {
        return Err(Error::InvalidArgument("at least one party is required".into()));
    }
    if train.len() < parties {
        return Err(Error::Data(format!("{} training rows cannot feed {parties} parties", train.len())));
    }
    let mut feats = vec![Vec::new(); parties];
    let mut targs = vec![Vec::new(); parties];
    for (k, &r) in train.iter().enumerate() {
        let (f, y) = transform(&data.features[r], data.targets[r]);
        feats[k % parties].push(f);
        targs[k % parties].push(y);
    }
    let parties = feats
        .into_iter()
        .zip(targs)
        .enumerate()
        .map(|(i, (f, t))| PartyDataset::new(i, f, t))
        .collect::<Result<_>>()?;
    let (test_features, test_targets) = test.iter().map(|&r| transform(&data.features[r], data.targets[r])).unzip();
    Ok(Partition { parties, test_features, test_targets })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub data: PathBuf,
    pub parties: usize,
    pub threshold: usize,
    pub lambdas: Vec<f64>,
    /// `(σ_r², σ_β²)` pairs.
    pub sigmas: Vec<(f64, f64)>,
    pub methods: Vec<Method>,
    pub repeats: usize,
    pub train_frac: f64,
    pub seed: u64,
    pub normalize_on_train: bool,
    pub alphas: AlphaChoice,
}

impl ExperimentSpec {
    pub fn new(data: impl Into<PathBuf>) -> Self {
        Self {
            data: data.into(),
            parties: 5,
            threshold: 3,
            lambdas: vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            sigmas: vec![(1e4, 1e5)],
            methods: Method::ALL.to_vec(),
            repeats: 10,
            train_frac: 0.8,
            seed: 0,
            normalize_on_train: false,
            alphas: AlphaChoice::Random,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return Err(Error::InvalidArgument(format!("train fraction must be in (0, 1), got {}", self.train_frac)));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be at least 1".into()));
        }
        if self.lambdas.is_empty() || self.sigmas.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidArgument("lambda, sigma and method lists must be non-empty".into()));
        }
        if self.threshold == 0 || self.threshold >= self.parties {
            return Err(Error::InvalidArgument(format!(
                "threshold must satisfy 1 <= t < n, got t={}, n={}",
                self.threshold, self.parties
            )));
        }
        Ok(())
    }
}

/// Summary of one (method, λ, σ) cell over all repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub method: Method,
    pub lambda: f64,
    pub sigma_r2: f64,
    pub sigma_beta2: f64,
    pub mean_mse: Option<f64>,
    /// Population standard deviation over successful repeats.
    pub std_mse: Option<f64>,
    pub mse: Vec<Option<f64>>,
    pub failures: usize,
    pub errors: Vec<String>,
    /// Sum of ledgers over repeats.
    pub ledger_total: OpeningLedger,
    /// Largest opening count of a single solve.
    pub openings_per_solve: Option<u64>,
    pub bytes_total: u64,
    pub retries: u32,
    pub sigma_x2: Option<f64>,
    pub leakage_bound_nats: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub sigma_convention: &'static str,
    pub partitioning: &'static str,
    pub normalization: &'static str,
    pub leakage_layout: String,
    pub dataset: String,
    pub rows: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    /// Model dimension including the intercept.
    pub dim: usize,
    pub parties: usize,
    pub threshold: usize,
    pub repeats: usize,
    pub train_frac: f64,
    pub seed: u64,
    pub cells: Vec<CellReport>,
}

impl ExperimentReport {
    pub fn cell(&self, method: Method, lambda: f64, sigma_r2: f64) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.method == method && c.lambda == lambda && c.sigma_r2 == sigma_r2)
    }

    /// Nested `method → λ → σ cell` JSON.
    pub fn to_json(&self) -> String {
        let mut nested: BTreeMap<String, BTreeMap<String, BTreeMap<String, &CellReport>>> = BTreeMap::new();
        for c in &self.cells {
            nested
                .entry(c.method.to_string())
                .or_default()
                .entry(format!("lambda={}", c.lambda))
                .or_default()
                .insert(format!("sigma_r2={},sigma_beta2={}", c.sigma_r2, c.sigma_beta2), c);
        }
        #[derive(Serialize)]
        struct Out<'a> {
            #[serde(flatten)]
            meta: Meta<'a>,
            methods: BTreeMap<String, BTreeMap<String, BTreeMap<String, &'a CellReport>>>,
        }
        #[derive(Serialize)]
        struct Meta<'a> {
            sigma_convention: &'a str,
            partitioning: &'a str,
            normalization: &'a str,
            leakage_layout: &'a str,
            dataset: &'a str,
            rows: usize,
            train_rows: usize,
            test_rows: usize,
            dim: usize,
            parties: usize,
            threshold: usize,
            repeats: usize,
            train_frac: f64,
            seed: u64,
        }
        let out = Out {
            meta: Meta {
                sigma_convention: self.sigma_convention,
                partitioning: self.partitioning,
                normalization: self.normalization,
                leakage_layout: &self.leakage_layout,
                dataset: &self.dataset,
                rows: self.rows,
                train_rows: self.train_rows,
                test_rows: self.test_rows,
                dim: self.dim,
                parties: self.parties,
                threshold: self.threshold,
                repeats: self.repeats,
                train_frac: self.train_frac,
                seed: self.seed,
            },
            methods: nested,
        };
        serde_json::to_string_pretty(&out).expect("report serializes")
    }

    /// One row per cell.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "method,lambda,sigma_r2,sigma_beta2,mean_mse,std_mse,failures,openings_per_solve,total_openings,leakage_bound_nats,sigma_convention\n",
        );
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},\"{}\"",
                c.method,
                c.lambda,
                c.sigma_r2,
                c.sigma_beta2,
                opt(c.mean_mse),
                opt(c.std_mse),
                c.failures,
                c.openings_per_solve.map(|o| o.to_string()).unwrap_or_default(),
                c.ledger_total.openings,
                opt(c.leakage_bound_nats),
                SIGMA_CONVENTION
            );
        }
        s
    }
}

/// SplitMix64 step, used to derive independent per-repeat and per-cell seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Outcome of one repeat of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub w: DVector<f64>,
    pub mse: f64,
    pub ledger: OpeningLedger,
    pub retries: u32,
}

/// Runs the regression protocol once on a prepared partition. Features must
/// already include the intercept column.
pub fn run_once(
    partition: &Partition,
    method: Method,
    lambda: f64,
    session_config: &SessionConfig,
) -> Result<RunOutcome> {
    let d = partition.parties[0].dim();
    let total: usize = partition.parties.iter().map(PartyDataset::len).sum();
    let config = RegressionConfig::new(lambda, total, PriorSpec::standard(d))?;
    let aggregates = partition.parties.iter().map(local_aggregate).collect::<Result<Vec<_>>>()?;
    let (w, ledger, retries) = if method.is_secure() {
        let mut session = Session::new(session_config)?;
        let shared: Vec<_> = aggregates.iter().map(|a| share_aggregates(a, &mut session)).collect();
        let (a, b) = assemble_system(&shared, &config)?;
        let report = solve_secure(method, &a, &b, &mut session)?;
        (DVector::from_vec(report.w), report.ledger, report.retries)
    } else {
        let (a, b) = plaintext_system(&aggregates, &config)?;
        (solve_plain(method, &a, &b)?, OpeningLedger::default(), 0)
    };
    let mse = mse(&w, &partition.test_features, &partition.test_targets);
    Ok(RunOutcome { w, mse, ledger, retries })
}

/// Loads the spec's dataset and runs the grid.
pub fn run_grid(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    let data = load_csv(&spec.data)?;
    run_grid_on(&data, spec)
}

pub fn run_grid_on(data: &Dataset, spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let full_stats = MinMax::fit(data, 0..data.rows());

    // Partitions depend only on the repeat so every cell sees the same splits.
    let mut partitions = Vec::with_capacity(spec.repeats);
    for rep in 0..spec.repeats {
        let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(spec.seed, &[rep as u64]));
        let (train, test) = shuffled_split(data.rows(), spec.train_frac, &mut rng)?;
        let stats = if spec.normalize_on_train { MinMax::fit(data, train.iter().copied()) } else { full_stats.clone() };
        partitions.push(partition_rows(data, spec.parties, &train, &test, |f, y| {
            let (f, y) = stats.apply_row(f, y);
            (with_intercept(&f), y)
        })?);
    }
    let first = &partitions[0];
    let train_rows: usize = first.parties.iter().map(PartyDataset::len).sum();
    let mean_party_rows = train_rows as f64 / spec.parties as f64;

    let mut cells = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for (li, &lambda) in spec.lambdas.iter().enumerate() {
            for (si, &(sigma_r2, sigma_beta2)) in spec.sigmas.iter().enumerate() {
                let mut cell = CellReport {
                    method,
                    lambda,
                    sigma_r2,
                    sigma_beta2,
                    mean_mse: None,
                    std_mse: None,
                    mse: Vec::with_capacity(spec.repeats),
                    failures: 0,
                    errors: Vec::new(),
                    ledger_total: OpeningLedger::default(),
                    openings_per_solve: None,
                    bytes_total: 0,
                    retries: 0,
                    sigma_x2: None,
                    leakage_bound_nats: None,
                };
                for (rep, partition) in partitions.iter().enumerate() {
                    let seed = derive_seed(spec.seed, &[rep as u64, mi as u64, li as u64, si as u64]);
                    let session = SessionConfig::new(spec.parties, spec.threshold, seed)
                        .alphas(spec.alphas.clone())
                        .sigmas(sigma_r2, sigma_beta2);
                    match run_once(partition, method, lambda, &session) {
                        Ok(out) => {
                            cell.mse.push(Some(out.mse));
                            add_ledger(&mut cell.ledger_total, &out.ledger);
                            cell.retries += out.retries;
                            if method.is_secure() {
                                cell.openings_per_solve =
                                    Some(cell.openings_per_solve.unwrap_or(0).max(out.ledger.openings));
                            }
                        }
                        Err(e) => {
                            cell.mse.push(None);
                            cell.failures += 1;
                            cell.errors.push(format!("repeat {rep}: {e}"));
                        }
                    }
                }
                let ok: Vec<f64> = cell.mse.iter().flatten().copied().collect();
                if !ok.is_empty() {
                    let mean = ok.iter().sum::<f64>() / ok.len() as f64;
                    let var = ok.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / ok.len() as f64;
                    cell.mean_mse = Some(mean);
                    cell.std_mse = Some(var.sqrt());
                }
                cell.bytes_total = cell.ledger_total.bytes(spec.parties);
                if let Some(o) = cell.openings_per_solve {
                    let sx = sigma_x_estimate(mean_party_rows.round() as u64);
                    cell.sigma_x2 = Some(sx);
                    cell.leakage_bound_nats = leakage_for(spec, o, sigma_r2, sigma_beta2, sx).ok();
                }
                cells.push(cell);
            }
        }
    }

    Ok(ExperimentReport {
        sigma_convention: SIGMA_CONVENTION,
        partitioning: PARTITIONING,
        normalization: if spec.normalize_on_train {
            "min-max to [0,1] using training rows of each repeat"
        } else {
            "min-max to [0,1] over the full dataset"
        },
        leakage_layout: format!(
            "alpha_i = 0.2 i - 0.1, basis on parties 1..={t}, adversary parties 2..={}; sigma_x2 = n_i * 7/144",
            spec.threshold + 1,
            t = spec.threshold
        ),
        dataset: spec.data.display().to_string(),
        rows: data.rows(),
        train_rows,
        test_rows: first.test_targets.len(),
        dim: data.num_features() + 1,
        parties: spec.parties,
        threshold: spec.threshold,
        repeats: spec.repeats,
        train_frac: spec.train_frac,
        seed: spec.seed,
        cells,
    })
}

/// Leakage bound for a run with `openings` openings on the reference party
/// layout for `(n, t)`.
fn leakage_for(spec: &ExperimentSpec, openings: u64, sigma_r2: f64, sigma_beta2: f64, sigma_x2: f64) -> Result<f64> {
    let t = spec.threshold;
    let basis: Vec<usize> = (0..t).collect();
    let adversary: Vec<usize> = (1..=t).collect();
    let scenario = LeakageScenario::from_parties(
        openings,
        &grid_alphas(spec.parties),
        &basis,
        &adversary,
        sigma_r2,
        sigma_beta2,
        sigma_x2,
    )?;
    leakage_bound(&scenario)
}

fn add_ledger(total: &mut OpeningLedger, l: &OpeningLedger) {
    total.openings += l.openings;
    total.multiplications += l.multiplications;
    total.inversions += l.inversions;
    total.direct_openings += l.direct_openings;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        parse_csv("a,b,y\n0,1,2\n5,1,3\n10,1,4\n".as_bytes()).unwrap()
    }

    #[test]
    fn parse_basic() {
        let d = tiny();
        assert_eq!(d.rows(), 3);
        assert_eq!(d.num_features(), 2);
        assert_eq!(d.targets, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_csv("".as_bytes()), Err(Error::Data(_))));
        assert!(matches!(parse_csv("a,y\n".as_bytes()), Err(Error::Data(_))));
        let e = parse_csv("a,y\n1,2\n1,x\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
        let e = parse_csv("a,y\n1,2\n1,2,3\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("row 3"), "{e}");
    }

    #[test]
    fn normalize_columns() {
        let n = normalize(&tiny());
        assert_eq!(n.features.iter().map(|r| r[0]).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        // constant column
        assert!(n.features.iter().all(|r| r[1] == 0.0));
        assert_eq!(n.targets, vec![0.0, 0.5, 1.0]);
        // already in [0, 1]
        assert_eq!(normalize(&n), n);
    }

    #[test]
    fn split_sizes() {
        let data = Dataset {
            feature_names: vec!["x".into()],
            target_name: "y".into(),
            features: (0..506).map(|i| vec![i as f64]).collect(),
            targets: vec![0.0; 506],
        };
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let p = split_and_partition(&data, 5, 0.8, &mut rng).unwrap();
        let sizes: Vec<usize> = p.parties.iter().map(PartyDataset::len).collect();
        assert_eq!(sizes, vec![81, 81, 81, 81, 80]);
        assert_eq!(p.test_targets.len(), 102);
        let mut rng2 = ChaCha20Rng::seed_from_u64(3);
        assert_eq!(split_and_partition(&data, 5, 0.8, &mut rng2).unwrap(), p);
    }

    #[test]
    fn too_few_rows() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(split_and_partition(&tiny(), 5, 0.8, &mut rng), Err(Error::Data(_))));
        assert!(split_and_partition(&tiny(), 1, 1.0, &mut rng).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
        assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
        assert_eq!(derive_seed(9, &[2, 3]), derive_seed(9, &[2, 3]));
    }
}
