//! Binary snapshots of a [`ModelState`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! header   magic "EVFZ" | version u16 | width u8 | p u32 | m u32 | R u32
//! body     field*  where field = tag u16 | len u32 | payload[len]
//! trailer  tag 0xFFFF | len 0
//! ```
//!
//! Every real number is written as an `f64` regardless of the model's scalar
//! type; `width` records that type (4 or 8) and must match on restore.
//! Unknown tags are skipped, so fields can be appended in later versions
//! without breaking older payloads. Field tags:
//!
//! | tag | field    | payload |
//! |-----|----------|---------|
//! | 1   | config   | `n u32`, then `n` entries of `name_len u8, name, kind u8, 8 bytes` (kind 0 f64, 1 u64, 2 bool) |
//! | 2   | q        | `m` reals |
//! | 3   | gate     | `delta1, step, floor` reals, `r_max_seen u64` |
//! | 4   | zedm     | `eta_q, eta_lambda, a_n`, `has_prev u8, f_prev`, `n_seen u64`, `delta3, delta4, tau, p0_q, p0_lambda` |
//! | 5   | scaler   | `enabled u8, len u32`, `len` minima, `len` maxima |
//! | 6   | counters | `seen, accepted, grown, pruned, recalled, skipped, next_id` as u64 |
//! | 7   | gmm      | `present u8`; if present `M u32`, `M` weights, `M x p` means, `M x p x p` covariances |
//! | 8   | warmup   | `n u32`, `n x p` reals |
//! | 9   | rules    | `R u32`, then `R` rule records |
//! | 10  | archive  | `cap u64, n u32`, then `n` of `pruned_at u64` followed by a rule record |
//!
//! A rule record is `id u64`, `c_lower p`, `c_upper p`, `inv_cov p²`,
//! `sigma p`, `weights (2p+1)·m`, `rls_cov (2p+1)²`, `lambda, psi_upper,
//! psi_lower`, `n_pop u64`, `coord_sum p`, `sq_sum p`, then utility statistics
//! `samples u64, mean_fs, var_fs`, `mean_t m`, `var_t m`, `cov m`,
//! `low_streak u32, since_win u32`. Matrices are row-major.

use std::collections::VecDeque;

use crate::adapt::ZedmState;
use crate::density::GmmDensity;
use crate::engine::{Counters, EngineConfig, ModelState, Scaler};
use crate::error::{Error, Result};
use crate::fuzzy::Rule;
use crate::gate::GateState;
use crate::linalg::Matrix;
use crate::rules::{ArchivedRule, RuleArchive, UtilityStats};
use crate::scalar::Real;

pub const MAGIC: [u8; 4] = *b"EVFZ";
pub const VERSION: u16 = 1;

const TAG_CONFIG: u16 = 1;
const TAG_Q: u16 = 2;
const TAG_GATE: u16 = 3;
const TAG_ZEDM: u16 = 4;
const TAG_SCALER: u16 = 5;
const TAG_COUNTERS: u16 = 6;
const TAG_GMM: u16 = 7;
const TAG_WARMUP: u16 = 8;
const TAG_RULES: u16 = 9;
const TAG_ARCHIVE: u16 = 10;
const TAG_END: u16 = 0xFFFF;

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in u32"));
    }
    fn real<T: Real>(&mut self, v: T) {
        self.buf.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    fn reals<T: Real>(&mut self, v: &[T]) {
        for &x in v {
            self.real(x);
        }
    }
    fn field(&mut self, tag: u16, body: Writer) {
        self.u16(tag);
        self.len(body.buf.len());
        self.buf.extend_from_slice(&body.buf);
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corrupt(msg.into())
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| corrupt("truncated payload"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("slice has length N"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
    fn real<T: Real>(&mut self) -> Result<T> {
        Ok(T::of(f64::from_le_bytes(self.array()?)))
    }
    fn reals<T: Real>(&mut self, n: usize) -> Result<Vec<T>> {
        if n.saturating_mul(8) > self.buf.len() - self.pos {
            return Err(corrupt("truncated payload"));
        }
        (0..n).map(|_| self.real()).collect()
    }
    fn matrix<T: Real>(&mut self, rows: usize, cols: usize) -> Result<Matrix<T>> {
        Ok(Matrix::from_row_major(rows, cols, self.reals(rows * cols)?))
    }
    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn config_entries(c: &EngineConfig) -> Vec<(&'static str, u8, [u8; 8])> {
    let f = |v: f64| (0u8, v.to_le_bytes());
    let n = |v: u64| (1u8, v.to_le_bytes());
    let b = |v: bool| (2u8, u64::from(v).to_le_bytes());
    let entries = [
        ("delta", f(c.delta)),
        ("epsilon", f(c.epsilon)),
        ("s", f(c.s)),
        ("omega", f(c.omega)),
        ("n_history", n(c.n_history as u64)),
        ("alpha_sig", f(c.alpha_sig)),
        ("u", f(c.u)),
        ("tau", f(c.tau)),
        ("delta3", f(c.delta3)),
        ("delta4", f(c.delta4)),
        ("theta_prune", f(c.theta_prune)),
        ("window", n(u64::from(c.window))),
        ("prune_decay", f(c.prune_decay)),
        ("rule_cap", n(c.rule_cap as u64)),
        ("archive_cap", n(c.archive_cap as u64)),
        ("decay", f(c.decay)),
        ("eta_q", f(c.eta_q)),
        ("eta_lambda", f(c.eta_lambda)),
        ("delta1_init", f(c.delta1_init)),
        ("q_init", f(c.q_init)),
        ("lambda_init", f(c.lambda_init)),
        ("default_radius", f(c.default_radius)),
        ("min_radius", f(c.min_radius)),
        ("seed", n(c.seed)),
        ("recall", b(c.recall)),
        ("active_learning", b(c.active_learning)),
        ("scale_inputs", b(c.scale_inputs)),
    ];
    entries.into_iter().map(|(k, (kind, bytes))| (k, kind, bytes)).collect()
}

fn write_rule<T: Real>(w: &mut Writer, r: &Rule<T>) {
    w.u64(r.id);
    w.reals(&r.c_lower);
    w.reals(&r.c_upper);
    w.reals(r.inv_cov.as_slice());
    w.reals(&r.sigma);
    w.reals(r.weights.as_slice());
    w.reals(r.rls_cov.as_slice());
    w.real(r.lambda);
    w.real(r.prev_psi_upper);
    w.real(r.prev_psi_lower);
    w.u64(r.n_pop);
    w.reals(&r.coord_sum);
    w.reals(&r.sq_sum);
    let u = &r.util;
    w.u64(u.samples);
    w.real(u.mean_fs);
    w.real(u.var_fs);
    w.reals(&u.mean_t);
    w.reals(&u.var_t);
    w.reals(&u.cov);
    w.u32(u.low_streak);
    w.u32(u.since_win);
}

fn read_rule<T: Real>(r: &mut Reader, p: usize, m: usize) -> Result<Rule<T>> {
    let k = 2 * p + 1;
    Ok(Rule {
        id: r.u64()?,
        c_lower: r.reals(p)?,
        c_upper: r.reals(p)?,
        inv_cov: r.matrix(p, p)?,
        sigma: r.reals(p)?,
        weights: r.matrix(k, m)?,
        rls_cov: r.matrix(k, k)?,
        lambda: r.real()?,
        prev_psi_upper: r.real()?,
        prev_psi_lower: r.real()?,
        n_pop: r.u64()?,
        coord_sum: r.reals(p)?,
        sq_sum: r.reals(p)?,
        util: UtilityStats {
            samples: r.u64()?,
            mean_fs: r.real()?,
            var_fs: r.real()?,
            mean_t: r.reals(m)?,
            var_t: r.reals(m)?,
            cov: r.reals(m)?,
            low_streak: r.u32()?,
            since_win: r.u32()?,
        },
    })
}

impl<T: Real> ModelState<T> {
    /// Serializes every field of the model; see the module docs for the layout.
    pub fn snapshot(&self) -> Vec<u8> {
        let (p, m) = (self.p, self.m);
        let mut w = Writer::default();
        w.buf.extend_from_slice(&MAGIC);
        w.u16(VERSION);
        w.u8(T::WIDTH);
        w.len(p);
        w.len(m);
        w.len(self.rules.len());

        let mut f = Writer::default();
        let entries = config_entries(&self.config);
        f.len(entries.len());
        for (name, kind, bytes) in entries {
            f.u8(name.len() as u8);
            f.buf.extend_from_slice(name.as_bytes());
            f.u8(kind);
            f.buf.extend_from_slice(&bytes);
        }
        w.field(TAG_CONFIG, f);

        let mut f = Writer::default();
        f.reals(&self.q);
        w.field(TAG_Q, f);

        let mut f = Writer::default();
        f.real(self.gate.delta1);
        f.real(self.gate.step);
        f.real(self.gate.floor);
        f.u64(self.gate.r_max_seen as u64);
        w.field(TAG_GATE, f);

        let z = &self.zedm;
        let mut f = Writer::default();
        f.real(z.eta_q);
        f.real(z.eta_lambda);
        f.real(z.a_n);
        f.u8(u8::from(z.f_prev.is_some()));
        f.real(z.f_prev.unwrap_or_else(T::zero));
        f.u64(z.n_seen);
        f.reals(&[z.delta3, z.delta4, z.tau, z.p0_q, z.p0_lambda]);
        w.field(TAG_ZEDM, f);

        let mut f = Writer::default();
        f.u8(u8::from(self.scaler.enabled));
        f.len(self.scaler.min.len());
        f.reals(&self.scaler.min);
        f.reals(&self.scaler.max);
        w.field(TAG_SCALER, f);

        let c = &self.counters;
        let mut f = Writer::default();
        for v in [c.seen, c.accepted, c.grown, c.pruned, c.recalled, c.skipped, self.next_id] {
            f.u64(v);
        }
        w.field(TAG_COUNTERS, f);

        let mut f = Writer::default();
        match &self.gmm {
            None => f.u8(0),
            Some(g) => {
                f.u8(1);
                f.len(g.n_components());
                f.reals(&g.weights);
                for mean in &g.means {
                    f.reals(mean);
                }
                for cov in &g.covs {
                    f.reals(cov.as_slice());
                }
            }
        }
        w.field(TAG_GMM, f);

        let mut f = Writer::default();
        f.len(self.warmup.len());
        for x in &self.warmup {
            f.reals(x);
        }
        w.field(TAG_WARMUP, f);

        let mut f = Writer::default();
        f.len(self.rules.len());
        for r in &self.rules {
            write_rule(&mut f, r);
        }
        w.field(TAG_RULES, f);

        let mut f = Writer::default();
        f.u64(self.archive.cap as u64);
        f.len(self.archive.len());
        for a in &self.archive.entries {
            f.u64(a.pruned_at);
            write_rule(&mut f, &a.rule);
        }
        w.field(TAG_ARCHIVE, f);

        w.u16(TAG_END);
        w.u32(0);
        w.buf
    }

    /// Rebuilds a model from [`snapshot`](Self::snapshot) bytes. Either the
    /// whole model is restored or an error is returned.
    pub fn restore(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4).map_err(|_| Error::BadMagic)? != MAGIC {
            return Err(Error::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let width = r.u8()?;
        if width != T::WIDTH {
            return Err(Error::ScalarWidth { expected: T::WIDTH, found: width });
        }
        let p = r.len()?;
        let m = r.len()?;
        let n_rules = r.len()?;
        if p == 0 || m == 0 {
            return Err(corrupt("zero dimension in header"));
        }

        let mut config = None;
        let mut q = None;
        let mut gate = None;
        let mut zedm = None;
        let mut scaler = None;
        let mut counters = None;
        let mut gmm = None;
        let mut warmup = None;
        let mut rules = None;
        let mut archive = None;

        loop {
            let tag = r.u16()?;
            let len = r.len()?;
            if tag == TAG_END {
                break;
            }
            let mut f = Reader::new(r.take(len)?);
            match tag {
                TAG_CONFIG => {
                    let mut c = EngineConfig::default();
                    for _ in 0..f.len()? {
                        let name_len = f.u8()? as usize;
                        let name = std::str::from_utf8(f.take(name_len)?).map_err(|_| corrupt("config key not utf-8"))?;
                        let kind = f.u8()?;
                        let raw: [u8; 8] = f.array()?;
                        let text = match kind {
                            0 => {
                                set_f64(&mut c, name, f64::from_le_bytes(raw))?;
                                continue;
                            }
                            1 => u64::from_le_bytes(raw).to_string(),
                            2 => (u64::from_le_bytes(raw) != 0).to_string(),
                            _ => return Err(corrupt("unknown config value kind")),
                        };
                        c.set(name, &text).map_err(|e| corrupt(e.to_string()))?;
                    }
                    config = Some(c);
                }
                TAG_Q => q = Some(f.reals::<T>(m)?),
                TAG_GATE => {
                    let mut g = GateState::new(f.real()?, f.real()?);
                    g.floor = f.real()?;
                    g.r_max_seen = f.u64()? as usize;
                    gate = Some(g);
                }
                TAG_ZEDM => {
                    let eta_q = f.real()?;
                    let eta_lambda = f.real()?;
                    let a_n = f.real()?;
                    let has_prev = f.u8()? != 0;
                    let prev = f.real()?;
                    let n_seen = f.u64()?;
                    let v = f.reals::<T>(5)?;
                    let mut z = ZedmState::new(eta_q, eta_lambda, v[0], v[1], v[2]);
                    z.a_n = a_n;
                    z.f_prev = has_prev.then_some(prev);
                    z.n_seen = n_seen;
                    z.p0_q = v[3];
                    z.p0_lambda = v[4];
                    zedm = Some(z);
                }
                TAG_SCALER => {
                    let enabled = f.u8()? != 0;
                    let n = f.len()?;
                    if n != 0 && n != p {
                        return Err(corrupt("scaler dimension mismatch"));
                    }
                    scaler = Some(Scaler { enabled, min: f.reals(n)?, max: f.reals(n)? });
                }
                TAG_COUNTERS => {
                    let mut v = [0u64; 7];
                    for x in &mut v {
                        *x = f.u64()?;
                    }
                    let c = Counters {
                        seen: v[0],
                        accepted: v[1],
                        grown: v[2],
                        pruned: v[3],
                        recalled: v[4],
                        skipped: v[5],
                    };
                    counters = Some((c, v[6]));
                }
                TAG_GMM => {
                    gmm = Some(if f.u8()? == 0 {
                        None
                    } else {
                        let k = f.len()?;
                        if k == 0 || k > 64 {
                            return Err(corrupt("implausible mixture size"));
                        }
                        let weights = f.reals(k)?;
                        let means = (0..k).map(|_| f.reals(p)).collect::<Result<Vec<_>>>()?;
                        let covs = (0..k).map(|_| f.matrix(p, p)).collect::<Result<Vec<_>>>()?;
                        Some(GmmDensity { means, covs, weights })
                    });
                }
                TAG_WARMUP => {
                    let n = f.len()?;
                    warmup = Some((0..n).map(|_| f.reals(p)).collect::<Result<Vec<_>>>()?);
                }
                TAG_RULES => {
                    let n = f.len()?;
                    if n != n_rules {
                        return Err(corrupt("rule count disagrees with header"));
                    }
                    rules = Some((0..n).map(|_| read_rule(&mut f, p, m)).collect::<Result<Vec<_>>>()?);
                }
                TAG_ARCHIVE => {
                    let cap = f.u64()? as usize;
                    let n = f.len()?;
                    let mut entries = VecDeque::with_capacity(n.min(1024));
                    for _ in 0..n {
                        let pruned_at = f.u64()?;
                        entries.push_back(ArchivedRule { rule: read_rule(&mut f, p, m)?, pruned_at });
                    }
                    archive = Some(RuleArchive { entries, cap });
                }
                _ => {
                    log::debug!("skipping unknown snapshot field {tag}");
                    continue;
                }
            }
            if !f.done() {
                return Err(corrupt(format!("field {tag} has trailing bytes")));
            }
        }
        if !r.done() {
            return Err(corrupt("bytes after end marker"));
        }

        let missing = |what: &str| corrupt(format!("missing field {what}"));
        let (counters, next_id) = counters.ok_or_else(|| missing("counters"))?;
        let model = ModelState {
            config: config.ok_or_else(|| missing("config"))?,
            p,
            m,
            rules: rules.ok_or_else(|| missing("rules"))?,
            archive: archive.ok_or_else(|| missing("archive"))?,
            q: q.ok_or_else(|| missing("q"))?,
            gate: gate.ok_or_else(|| missing("gate"))?,
            zedm: zedm.ok_or_else(|| missing("zedm"))?,
            gmm: gmm.ok_or_else(|| missing("gmm"))?,
            warmup: warmup.ok_or_else(|| missing("warmup"))?,
            scaler: scaler.ok_or_else(|| missing("scaler"))?,
            counters,
            next_id,
        };
        model.config.validate().map_err(|e| corrupt(e.to_string()))?;
        model.check_invariants().map_err(corrupt)?;
        Ok(model)
    }
}

fn set_f64(c: &mut EngineConfig, name: &str, v: f64) -> Result<()> {
    let slot = match name {
        "delta" => &mut c.delta,
        "epsilon" => &mut c.epsilon,
        "s" => &mut c.s,
        "omega" => &mut c.omega,
        "alpha_sig" => &mut c.alpha_sig,
        "u" => &mut c.u,
        "tau" => &mut c.tau,
        "delta3" => &mut c.delta3,
        "delta4" => &mut c.delta4,
        "theta_prune" => &mut c.theta_prune,
        "prune_decay" => &mut c.prune_decay,
        "decay" => &mut c.decay,
        "eta_q" => &mut c.eta_q,
        "eta_lambda" => &mut c.eta_lambda,
        "delta1_init" => &mut c.delta1_init,
        "q_init" => &mut c.q_init,
        "lambda_init" => &mut c.lambda_init,
        "default_radius" => &mut c.default_radius,
        "min_radius" => &mut c.min_radius,
        _ => return Err(corrupt(format!("unknown real config key {name:?}"))),
    };
    *slot = v;
    Ok(())
}
