//! One-pass stream learner.
//!
//! [`ModelState::process_sample`] runs warm-up, the entropy gate, rule growth,
//! recall or premise update, pruning, consequent learning and design-factor
//! adaptation for one `(x, t)` pair. Nothing about past samples is kept
//! beyond the recursive accumulators on each rule and the short warm-up
//! buffer used to fit the input density.

use serde::{Deserialize, Serialize};

use crate::adapt::{fwgrls_step, zedm_step, ZedmState};
use crate::density::{fit_gmm, GmmDensity};
use crate::error::{Error, Result};
use crate::fuzzy::{commit_memory, evaluate, Inference, Rule};
use crate::gate::{esem_entropy, neighborhood_probability, GateState};
use crate::rules::{
    conflict_threshold, find_recall, gt2dq_significance, lowest_utility, make_hypothetical, norm, prune_rules,
    record_utility, reinstate, select_winner, should_grow, update_premise, RuleArchive, RuleSeed,
};
use crate::scalar::Real;

/// Tunable constants. All values are stored as `f64` and converted to the
/// model's scalar type on use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Half-width of the interval centroid of a new rule.
    pub delta: f64,
    /// ε-completeness level used to size new rules.
    pub epsilon: f64,
    /// Multiplicative step of the gate threshold.
    pub s: f64,
    /// Initial diagonal of a new rule's RLS covariance.
    pub omega: f64,
    /// Warm-up length, also the sample count the input density is fitted on.
    pub n_history: usize,
    /// Significance level of the χ² compatibility threshold.
    pub alpha_sig: f64,
    /// Exponent of the significance integral.
    pub u: f64,
    /// Parzen kernel width of the error density.
    pub tau: f64,
    pub delta3: f64,
    pub delta4: f64,
    pub theta_prune: f64,
    /// Accepted samples a rule must stay useless and idle before pruning.
    pub window: u32,
    /// Forgetting factor of the utility correlation.
    pub prune_decay: f64,
    pub rule_cap: usize,
    pub archive_cap: usize,
    /// Weight decay of the consequent update.
    pub decay: f64,
    pub eta_q: f64,
    pub eta_lambda: f64,
    pub delta1_init: f64,
    pub q_init: f64,
    pub lambda_init: f64,
    /// Radius of a rule grown when there is no other rule to size it against.
    pub default_radius: f64,
    pub min_radius: f64,
    pub seed: u64,
    pub recall: bool,
    pub active_learning: bool,
    pub scale_inputs: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            epsilon: 0.5,
            s: 0.01,
            omega: 1e5,
            n_history: 30,
            alpha_sig: 0.05,
            u: 2.0,
            tau: 1.0,
            delta3: 1.1,
            delta4: 0.9,
            theta_prune: 0.05,
            window: 50,
            prune_decay: 0.99,
            rule_cap: 100,
            archive_cap: 50,
            decay: 1e-7,
            eta_q: 0.01,
            eta_lambda: 0.01,
            delta1_init: std::f64::consts::LN_2 / 2.0,
            q_init: 0.5,
            lambda_init: 0.5,
            default_radius: 0.5,
            min_radius: 1e-3,
            seed: 0,
            recall: true,
            active_learning: true,
            scale_inputs: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad("delta must be finite and non-negative");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return bad("epsilon must lie in (0, 1)");
        }
        if !(self.s >= 0.0 && self.s < 1.0) {
            return bad("s must lie in [0, 1)");
        }
        if !positive(self.omega) || !positive(self.u) || !positive(self.tau) {
            return bad("omega, u and tau must be positive");
        }
        if self.n_history == 0 {
            return bad("n_history must be at least 1");
        }
        if !(self.alpha_sig > 0.0 && self.alpha_sig < 1.0) {
            return bad("alpha_sig must lie in (0, 1)");
        }
        if !(self.delta3 >= 1.0 && self.delta3.is_finite()) || !(self.delta4 > 0.0 && self.delta4 <= 1.0) {
            return bad("need delta3 >= 1 and 0 < delta4 <= 1");
        }
        if !in_unit(self.theta_prune) || !in_unit(self.prune_decay) {
            return bad("theta_prune and prune_decay must lie in [0, 1]");
        }
        if self.window == 0 || self.rule_cap == 0 {
            return bad("window and rule_cap must be at least 1");
        }
        if !(self.decay.is_finite() && self.decay >= 0.0) {
            return bad("decay must be finite and non-negative");
        }
        if !positive(self.eta_q) || !positive(self.eta_lambda) || !positive(self.delta1_init) {
            return bad("learning rates and delta1_init must be positive");
        }
        if !in_unit(self.q_init) || !in_unit(self.lambda_init) {
            return bad("q_init and lambda_init must lie in [0, 1]");
        }
        if !positive(self.default_radius) || !positive(self.min_radius) {
            return bad("default_radius and min_radius must be positive");
        }
        Ok(())
    }

    /// Sets one field from its textual form, as used by `key=value` overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let err = || Error::InvalidConfig(format!("bad value {value:?} for {key}"));
        let f = || value.trim().parse::<f64>().map_err(|_| err());
        let n = || value.trim().parse::<u64>().map_err(|_| err());
        let b = || value.trim().parse::<bool>().map_err(|_| err());
        match key {
            "delta" => self.delta = f()?,
            "epsilon" => self.epsilon = f()?,
            "s" => self.s = f()?,
            "omega" => self.omega = f()?,
            "n_history" => self.n_history = n()? as usize,
            "alpha_sig" => self.alpha_sig = f()?,
            "u" => self.u = f()?,
            "tau" => self.tau = f()?,
            "delta3" => self.delta3 = f()?,
            "delta4" => self.delta4 = f()?,
            "theta_prune" => self.theta_prune = f()?,
            "window" => self.window = u32::try_from(n()?).map_err(|_| err())?,
            "prune_decay" => self.prune_decay = f()?,
            "rule_cap" => self.rule_cap = n()? as usize,
            "archive_cap" => self.archive_cap = n()? as usize,
            "decay" => self.decay = f()?,
            "eta_q" => self.eta_q = f()?,
            "eta_lambda" => self.eta_lambda = f()?,
            "delta1_init" => self.delta1_init = f()?,
            "q_init" => self.q_init = f()?,
            "lambda_init" => self.lambda_init = f()?,
            "default_radius" => self.default_radius = f()?,
            "min_radius" => self.min_radius = f()?,
            "seed" => self.seed = n()?,
            "recall" => self.recall = b()?,
            "active_learning" => self.active_learning = b()?,
            "scale_inputs" => self.scale_inputs = b()?,
            _ => return Err(Error::InvalidConfig(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }
}

/// Online per-dimension min/max scaling onto `[-1, 1]`.
///
/// When the bounds widen, [`observe`](Self::observe) returns the affine map
/// from old to new scaled coordinates so the model can follow it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler<T> {
    pub enabled: bool,
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Real> Scaler<T> {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, min: Vec::new(), max: Vec::new() }
    }

    /// Widens the bounds to include `x`. Returns `(a, b)` with
    /// `x_new = a x_old + b` per dimension when any bound moved.
    pub fn observe(&mut self, x: &[T]) -> Option<(Vec<T>, Vec<T>)> {
        if !self.enabled {
            return None;
        }
        if self.min.is_empty() {
            self.min = x.to_vec();
            self.max = x.to_vec();
            return None;
        }
        let (old_min, old_max) = (self.min.clone(), self.max.clone());
        for (j, &v) in x.iter().enumerate() {
            self.min[j] = self.min[j].min(v);
            self.max[j] = self.max[j].max(v);
        }
        if old_min == self.min && old_max == self.max {
            return None;
        }
        let (one, two) = (T::one(), T::of(2.0));
        let (a, b) = (0..x.len())
            .map(|j| {
                let r_old = old_max[j] - old_min[j];
                let r_new = self.max[j] - self.min[j];
                if !(r_new > T::zero()) {
                    (one, T::zero())
                } else if !(r_old > T::zero()) {
                    // every earlier sample sat at the one value that scaled to 0
                    (one, two * (old_min[j] - self.min[j]) / r_new - one)
                } else {
                    (r_old / r_new, (r_old + two * (old_min[j] - self.min[j])) / r_new - one)
                }
            })
            .unzip();
        Some((a, b))
    }

    /// Maps `x` with the current bounds; values outside them are clamped.
    pub fn scale(&self, x: &[T]) -> Vec<T> {
        if !self.enabled {
            return x.to_vec();
        }
        if self.min.is_empty() {
            return vec![T::zero(); x.len()];
        }
        let one = T::one();
        x.iter()
            .enumerate()
            .map(|(j, &v)| {
                let range = self.max[j] - self.min[j];
                if range > T::zero() {
                    (T::of(2.0) * (v - self.min[j]) / range - one).max(-one).min(one)
                } else {
                    T::zero()
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub seen: u64,
    pub accepted: u64,
    /// Rules created, including the bootstrap rule.
    pub grown: u64,
    /// Rules archived, by pruning or by eviction at the rule cap.
    pub pruned: u64,
    pub recalled: u64,
    /// Samples dropped after an internal numeric failure.
    pub skipped: u64,
}

/// What happened to one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleTrace<T> {
    /// Zero-based position in the stream.
    pub index: u64,
    /// Output before this sample changed anything; `None` for the very
    /// first sample, which no model existed to predict.
    pub prediction: Option<Vec<T>>,
    pub warmup: bool,
    pub accepted: bool,
    pub entropy: Option<T>,
    pub delta1: T,
    pub winner: Option<u64>,
    pub grown: Option<u64>,
    pub recalled: Option<u64>,
    pub pruned: Vec<u64>,
    pub error_density: Option<T>,
    pub rule_count: usize,
    pub q: Vec<T>,
    pub skipped: Option<String>,
}

/// Complete learner state for one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<T> {
    pub config: EngineConfig,
    pub p: usize,
    pub m: usize,
    pub rules: Vec<Rule<T>>,
    pub archive: RuleArchive<T>,
    pub q: Vec<T>,
    pub gate: GateState<T>,
    pub zedm: ZedmState<T>,
    pub gmm: Option<GmmDensity<T>>,
    pub warmup: Vec<Vec<T>>,
    pub scaler: Scaler<T>,
    pub counters: Counters,
    pub next_id: u64,
}

impl<T: Real> ModelState<T> {
    pub fn new(config: EngineConfig, p: usize, m: usize) -> Result<Self> {
        config.validate()?;
        if p == 0 || m == 0 {
            return Err(Error::InvalidConfig("input and output dimensions must be at least 1".into()));
        }
        Ok(Self {
            p,
            m,
            rules: Vec::new(),
            archive: RuleArchive::new(config.archive_cap),
            q: vec![T::of(config.q_init); m],
            gate: GateState::new(T::of(config.delta1_init), T::of(config.s)),
            zedm: ZedmState::new(
                T::of(config.eta_q),
                T::of(config.eta_lambda),
                T::of(config.delta3),
                T::of(config.delta4),
                T::of(config.tau),
            ),
            gmm: None,
            warmup: Vec::new(),
            scaler: Scaler::new(config.scale_inputs),
            counters: Counters::default(),
            next_id: 1,
            config,
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn warmed_up(&self) -> bool {
        self.gmm.is_some()
    }

    /// `exp(-χ²_{1-α, p})`
    pub fn delta2(&self) -> T {
        T::of(conflict_threshold(self.p, self.config.alpha_sig))
    }

    fn q_mean(&self) -> T {
        self.q.iter().copied().sum::<T>() / T::of(self.m as f64)
    }

    fn seed(&self) -> RuleSeed<T> {
        let c = &self.config;
        RuleSeed {
            delta: T::of(c.delta),
            epsilon: T::of(c.epsilon),
            omega: T::of(c.omega),
            lambda: T::of(c.lambda_init),
            default_radius: T::of(c.default_radius),
            min_radius: T::of(c.min_radius),
        }
    }

    fn check_input(&self, x: &[T], t: Option<&[T]>) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch { what: "input", expected: self.p, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("input"));
        }
        if let Some(t) = t {
            if t.len() != self.m {
                return Err(Error::DimensionMismatch { what: "target", expected: self.m, got: t.len() });
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("target"));
            }
        }
        Ok(())
    }

    /// Pure prediction for a raw input. Recurrent memories are read, not
    /// advanced.
    pub fn predict(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x, None)?;
        if self.rules.is_empty() {
            return Err(Error::EmptyModel);
        }
        let xs = self.scaler.scale(x);
        Ok(evaluate(&self.rules, &self.q, &xs)?.output)
    }

    /// Learns from one sample and reports every decision taken.
    ///
    /// Invalid input is an error and leaves the model unchanged. An internal
    /// numeric failure drops the sample: the returned trace carries the
    /// reason and only the `seen` and `skipped` counters move.
    pub fn process_sample(&mut self, x: &[T], t: &[T]) -> Result<SampleTrace<T>> {
        self.check_input(x, Some(t))?;
        let backup = self.clone();
        match self.step(x, t) {
            Ok(trace) => Ok(trace),
            Err(e) => {
                *self = backup;
                log::warn!("sample {} skipped: {e}", self.counters.seen);
                let trace = SampleTrace {
                    index: self.counters.seen,
                    prediction: None,
                    warmup: !self.warmed_up(),
                    accepted: false,
                    entropy: None,
                    delta1: self.gate.delta1,
                    winner: None,
                    grown: None,
                    recalled: None,
                    pruned: Vec::new(),
                    error_density: None,
                    rule_count: self.rules.len(),
                    q: self.q.clone(),
                    skipped: Some(e.to_string()),
                };
                self.counters.seen += 1;
                self.counters.skipped += 1;
                Ok(trace)
            }
        }
    }

    fn step(&mut self, x: &[T], t: &[T]) -> Result<SampleTrace<T>> {
        let index = self.counters.seen;
        self.counters.seen += 1;
        if let Some((a, b)) = self.scaler.observe(x) {
            self.reexpress(&a, &b)?;
        }
        let xs = self.scaler.scale(x);

        let mut trace = SampleTrace {
            index,
            prediction: None,
            warmup: !self.warmed_up(),
            accepted: true,
            entropy: None,
            delta1: self.gate.delta1,
            winner: None,
            grown: None,
            recalled: None,
            pruned: Vec::new(),
            error_density: None,
            rule_count: 0,
            q: Vec::new(),
            skipped: None,
        };

        if self.rules.is_empty() {
            self.bootstrap(&xs, t)?;
            trace.grown = Some(self.rules[0].id);
            self.finish_warmup(&xs)?;
            trace.rule_count = 1;
            trace.q = self.q.clone();
            return Ok(trace);
        }

        let first = evaluate(&self.rules, &self.q, &xs)?;
        trace.prediction = Some(first.output.clone());
        let error: Vec<T> = first.output.iter().zip(t).map(|(&y, &tt)| y - tt).collect();

        if self.warmed_up() && self.config.active_learning {
            if self.rules.len() > 1 {
                let h = esem_entropy(&neighborhood_probability(&self.rules, &xs));
                trace.entropy = Some(h);
                trace.accepted = self.gate.decide(h);
                trace.delta1 = self.gate.delta1;
            } else {
                // entropy is identically zero here, so only novelty can pass
                trace.accepted = first.firings[0].crisp(self.q_mean()) <= self.delta2();
            }
        }
        if !trace.accepted {
            trace.rule_count = self.rules.len();
            trace.q = self.q.clone();
            return Ok(trace);
        }
        self.counters.accepted += 1;

        let old_ids: Vec<u64> = self.rules.iter().map(|r| r.id).collect();
        let q_bar = self.q_mean();
        let w = select_winner(&self.rules, &first.firings, q_bar);
        trace.winner = Some(self.rules[w].id);
        self.structural_step(&xs, &first, w, q_bar, &mut trace)?;
        self.gate.observe_rule_count(self.rules.len());

        let second = evaluate(&self.rules, &self.q, &xs)?;
        let winner_pos = trace
            .grown
            .or(trace.recalled)
            .or(trace.winner)
            .and_then(|id| self.rules.iter().position(|r| r.id == id))
            .unwrap_or(0);
        record_utility(
            &mut self.rules,
            &second.firings,
            q_bar,
            t,
            winner_pos,
            T::of(self.config.theta_prune),
            T::of(self.config.prune_decay),
        );
        let pruned = prune_rules(&mut self.rules, &mut self.archive, self.config.window, index);
        self.counters.pruned += pruned.len() as u64;
        trace.pruned.extend(pruned);

        let third = if trace.pruned.is_empty() { second } else { evaluate(&self.rules, &self.q, &xs)? };
        let decay = T::of(self.config.decay);
        let tiny = T::of(1e-12);
        for (i, rule) in self.rules.iter_mut().enumerate() {
            let lam = third.normalized_firing(i, q_bar);
            if lam >= tiny {
                fwgrls_step(rule, &third.x_e, t, lam, decay);
            }
        }
        commit_memory(&mut self.rules, &third);

        let mut lambdas: Vec<T> = old_ids
            .iter()
            .map(|id| self.rules.iter().find(|r| r.id == *id).map_or(T::zero(), |r| r.lambda))
            .collect();
        let outcome = zedm_step(&mut self.q, &mut lambdas, &mut self.zedm, &first, &error);
        for (id, lam) in old_ids.iter().zip(lambdas) {
            if let Some(r) = self.rules.iter_mut().find(|r| r.id == *id) {
                r.lambda = lam;
            }
        }
        trace.error_density = Some(outcome.f0);

        self.finish_warmup(&xs)?;
        trace.rule_count = self.rules.len();
        trace.q = self.q.clone();
        Ok(trace)
    }

    /// Follows a change of scaled coordinates `x' = a x + b` everywhere the
    /// model stores positions, so premises, densities and the mixture keep
    /// describing the same raw-input regions.
    fn reexpress(&mut self, a: &[T], b: &[T]) -> Result<()> {
        for r in &mut self.rules {
            r.reexpress(a, b)?;
        }
        for entry in &mut self.archive.entries {
            entry.rule.reexpress(a, b)?;
        }
        if let Some(g) = &mut self.gmm {
            g.reexpress(a, b);
        }
        for x in &mut self.warmup {
            for (v, (&aj, &bj)) in x.iter_mut().zip(a.iter().zip(b)) {
                *v = aj * *v + bj;
            }
        }
        Ok(())
    }

    fn bootstrap(&mut self, xs: &[T], t: &[T]) -> Result<()> {
        let seed = self.seed();
        let mut rule = make_hypothetical(&[], None, xs, &seed, self.next_id, self.m)?;
        self.next_id += 1;
        let x_e = crate::fuzzy::chebyshev_expand(xs);
        fwgrls_step(&mut rule, &x_e, t, T::one(), T::of(self.config.decay));
        self.rules.push(rule);
        self.counters.grown += 1;
        self.counters.accepted += 1;
        Ok(())
    }

    /// Grow, recall or update the winner's premise.
    fn structural_step(
        &mut self,
        xs: &[T],
        inf: &Inference<T>,
        w: usize,
        q_bar: T,
        trace: &mut SampleTrace<T>,
    ) -> Result<()> {
        let delta2 = self.delta2();
        let compatibility = inf.firings.iter().map(|f| f.crisp(q_bar)).fold(T::zero(), T::max);
        if compatibility > delta2 {
            update_premise(&mut self.rules[w], xs);
            return Ok(());
        }

        let seed = self.seed();
        let hyp = make_hypothetical(&self.rules, Some(&self.rules[w]), xs, &seed, self.next_id, self.m)?;
        let u = T::of(self.config.u);
        let (grow, e_hyp) = match &self.gmm {
            None => (true, None),
            Some(gmm) => {
                let e_existing = self
                    .rules
                    .iter()
                    .zip(&inf.betas)
                    .map(|(r, b)| gt2dq_significance(r, norm(b), q_bar, gmm, u))
                    .collect::<Result<Vec<_>>>()?;
                let e_hyp = gt2dq_significance(&hyp, norm(&inf.betas[w]), q_bar, gmm, u)?;
                (should_grow(e_hyp, &e_existing, compatibility, delta2), Some(e_hyp))
            }
        };
        if !grow {
            update_premise(&mut self.rules[w], xs);
            return Ok(());
        }

        if let (true, Some(gmm), Some(e_hyp)) = (self.config.recall, &self.gmm, e_hyp) {
            if let Some(k) = find_recall(&self.archive, xs, &inf.x_e, q_bar, delta2, gmm, u, e_hyp)? {
                let rule = reinstate(&mut self.archive, k, xs);
                trace.recalled = Some(rule.id);
                self.counters.recalled += 1;
                self.make_room(trace);
                self.rules.push(rule);
                return Ok(());
            }
        }

        self.next_id += 1;
        trace.grown = Some(hyp.id);
        self.counters.grown += 1;
        self.make_room(trace);
        self.rules.push(hyp);
        Ok(())
    }

    /// Archives the least useful rule when the base is at its cap.
    fn make_room(&mut self, trace: &mut SampleTrace<T>) {
        while self.rules.len() >= self.config.rule_cap {
            let Some(i) = lowest_utility(&self.rules) else { break };
            let r = self.rules.remove(i);
            trace.pruned.push(r.id);
            self.counters.pruned += 1;
            self.archive.push(r, self.counters.seen - 1);
        }
    }

    fn finish_warmup(&mut self, xs: &[T]) -> Result<()> {
        if self.gmm.is_some() {
            return Ok(());
        }
        self.warmup.push(xs.to_vec());
        if self.warmup.len() >= self.config.n_history {
            self.gmm = Some(fit_gmm(&self.warmup, self.config.seed)?);
            self.warmup = Vec::new();
        }
        Ok(())
    }

    /// Scalars held by the model, in bytes. Depends on the rule and archive
    /// sizes only, never on how many samples have been seen.
    pub fn live_size_bytes(&self) -> usize {
        fn rule_scalars<T: Real>(r: &Rule<T>) -> usize {
            r.c_lower.len()
                + r.c_upper.len()
                + r.inv_cov.as_slice().len()
                + r.sigma.len()
                + r.weights.as_slice().len()
                + r.rls_cov.as_slice().len()
                + r.coord_sum.len()
                + r.sq_sum.len()
                + 3 * r.util.mean_t.len()
                + 8
        }
        let rules: usize = self.rules.iter().map(rule_scalars).sum();
        let archived: usize = self.archive.entries.iter().map(|a| rule_scalars(&a.rule)).sum();
        let warm: usize = self.warmup.iter().map(Vec::len).sum();
        let gmm = self.gmm.as_ref().map_or(0, |g| g.n_components() * (1 + self.p + self.p * self.p));
        let fixed = self.q.len() + 2 * self.scaler.min.len() + 16;
        (rules + archived + warm + gmm + fixed) * std::mem::size_of::<T>()
    }

    /// Upper bound on [`live_size_bytes`](Self::live_size_bytes) for a model
    /// holding `r` live rules and a full archive.
    pub fn size_bound_bytes(&self, r: usize) -> usize {
        let (p, m) = (self.p, self.m);
        let k = 2 * p + 1;
        let per_rule = 2 * p + p * p + p + k * m + k * k + 2 * p + 3 * m + 8;
        let total = (r + self.config.archive_cap) * per_rule
            + self.config.n_history * p
            + 3 * (1 + p + p * p)
            + m
            + 2 * p
            + 16;
        total * std::mem::size_of::<T>()
    }

    /// Checks every documented invariant of the model and its rules.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.counters.seen > 0 && self.rules.is_empty() && self.counters.skipped < self.counters.seen {
            return Err("no rules after a processed sample".into());
        }
        if self.counters.accepted > self.counters.seen {
            return Err("accepted exceeds seen".into());
        }
        if self.q.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err("q out of [0,1]".into());
        }
        for r in &self.rules {
            r.check_invariants()?;
        }
        Ok(())
    }
}
