//! Acceptance run: one line per criterion, nonzero exit on any failure.
//!
//! Every reference value here is computed by code in this file from the
//! defining formulas, never by calling the routine under test.

use std::f64::consts::LN_2;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use sasv_time::classifiers::{
    logreg::logreg_objective, oc_softmax_loss, GroupedMlp, GroupedMlpSpec, GbdtParams, LogregParams, OcSoftmaxParams, Standardizer,
};
use sasv_time::embedding::{regroup, regroup_values, EmbedConfig, Embedder, GroupKey};
use sasv_time::fusion::{
    alpha_grid, fuse_weighted, score_pairs, sweep_alpha, tune_fusion_classifier, FusionClassifierKind, PairedScores, PairedTrial,
};
use sasv_time::labels::{Gender, TrialClass};
use sasv_time::metrics::{
    adcf, asv_rates_at, asv_rates_at_eer, bootstrap_ci, dcf, eer, min_adcf_joint, min_dcf, min_tdcf_constrained,
    min_tdcf_unconstrained, tdcf_asv_constrained, tdcf_unconstrained, BootstrapConfig, C1Convention, TandemCostModel, TandemEntry,
    TandemScoreSet, Task, TrialScoreSet,
};
use sasv_time::pipeline::{
    cmd_build_models, cmd_embed, cmd_eval, cmd_score, cmd_synth, cmd_train_cm, cmd_train_gender, EvalReport, GenderMode, Group,
    Metric, RunConfig, Split,
};
use sasv_time::pmf::{smooth_for_divergence, Pmf, PmfGroupModel};
use sasv_time::similarity::{measure_vector_smoothed, measure_with, MeasureId, SimilarityConfig};

// ---------------------------------------------------------------------------
// reporting

struct Check {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self { failures: Vec::new(), notes: Vec::new() }
    }

    fn expect(&mut self, ok: bool, what: impl FnOnce() -> String) {
        // keep the first few so a systematic failure stays readable
        if !ok && self.failures.len() < 8 {
            self.failures.push(what());
        } else if !ok {
            self.failures.push(String::new());
        }
    }

    fn close(&mut self, got: f64, want: f64, tol: f64, what: impl FnOnce() -> String) {
        let ok = (got - want).abs() <= tol * want.abs().max(1.0) || got == want;
        self.expect(ok, || format!("{}: got {got:e}, want {want:e}", what()));
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

struct Outcome {
    name: &'static str,
    pass: bool,
    skipped: bool,
}

fn run(name: &'static str, limit: Duration, f: impl FnOnce(&mut Check)) -> Outcome {
    let start = Instant::now();
    let mut c = Check::new();
    f(&mut c);
    let took = start.elapsed();
    c.expect(took <= limit, || format!("runtime {took:.1?} over the {limit:?} limit"));
    let pass = c.failures.is_empty();
    println!("[{}] {name} ({:.1} s)", if pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
    for n in &c.notes {
        println!("       {n}");
    }
    let shown: Vec<&String> = c.failures.iter().filter(|f| !f.is_empty()).collect();
    for f in &shown {
        println!("       ! {f}");
    }
    if c.failures.len() > shown.len() {
        println!("       ! ... {} failures in total", c.failures.len());
    }
    Outcome { name, pass, skipped: false }
}

// ---------------------------------------------------------------------------
// compensated summation for the oracles

#[derive(Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        self.c += if self.s.abs() >= x.abs() { (self.s - t) + x } else { (x - t) + self.s };
        self.s = t;
    }

    fn get(&self) -> f64 {
        self.s + self.c
    }
}

fn sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = Sum::default();
    for x in it {
        s.add(x);
    }
    s.get()
}

// ---------------------------------------------------------------------------
// similarity oracles, straight from the definitions over every bin

fn o_kl(p: &[f64], q: &[f64]) -> f64 {
    sum(p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()))
}

fn o_js(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    0.5 * o_kl(p, &m) + 0.5 * o_kl(q, &m)
}

/// `sqrt(1 - sum sqrt(p q))`, written as `sqrt(sum (sqrt p - sqrt q)^2 / 2)`,
/// which is the same number for normalized inputs without the cancellation.
fn o_hellinger(p: &[f64], q: &[f64]) -> f64 {
    (0.5 * sum(p.iter().zip(q).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)))).sqrt()
}

fn o_intersection(p: &[f64], q: &[f64]) -> f64 {
    sum(p.iter().zip(q).map(|(a, b)| a.min(*b)))
}

fn o_ncc(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len() as f64;
    let (mp, mq) = (sum(p.iter().copied()) / n, sum(q.iter().copied()) / n);
    let cross = sum(p.iter().zip(q).map(|(a, b)| (a - mp) * (b - mq)));
    let vp = sum(p.iter().map(|a| (a - mp).powi(2)));
    let vq = sum(q.iter().map(|b| (b - mq).powi(2)));
    cross / (vp * vq).sqrt()
}

fn o_ks(p: &[f64], q: &[f64]) -> f64 {
    let (mut cp, mut cq, mut best) = (Sum::default(), Sum::default(), 0.0f64);
    for (a, b) in p.iter().zip(q) {
        cp.add(*a);
        cq.add(*b);
        best = best.max((cp.get() - cq.get()).abs());
    }
    best
}

/// Dense quadratic-chi with the full bin-similarity matrix.
fn o_qc(p: &[f64], q: &[f64], cfg: &SimilarityConfig) -> f64 {
    let n = p.len();
    let a = |i: usize, j: usize| {
        let d = i.abs_diff(j);
        if d <= cfg.qc_window {
            (-((d * d) as f64) / (2.0 * cfg.qc_sigma * cfg.qc_sigma)).exp()
        } else {
            0.0
        }
    };
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let z = sum((0..n).map(|c| (p[c] + q[c]) * a(c, i)));
            if z == 0.0 {
                0.0
            } else {
                (p[i] - q[i]) / z.powf(cfg.qc_exponent)
            }
        })
        .collect();
    let mut s = Sum::default();
    for i in 0..n {
        for j in 0..n {
            s.add(d[i] * d[j] * a(i, j));
        }
    }
    s.get().max(0.0).sqrt()
}

fn o_measure(id: MeasureId, p: &[f64], q: &[f64], cfg: &SimilarityConfig) -> f64 {
    match id {
        MeasureId::QuadraticChi => o_qc(p, q, cfg),
        MeasureId::NormalizedCrossCorrelation => o_ncc(p, q),
        MeasureId::Hellinger => o_hellinger(p, q),
        MeasureId::Intersection => o_intersection(p, q),
        MeasureId::KullbackLeibler => o_kl(p, q),
        MeasureId::SymmetricKL => o_kl(p, q) + o_kl(q, p),
        MeasureId::JensenShannon => o_js(p, q),
        MeasureId::ModifiedKolmogorovSmirnov => o_ks(p, q),
    }
}

fn o_smooth(p: &[f64], eps: f64) -> Vec<f64> {
    let u = 1.0 / p.len() as f64;
    p.iter().map(|b| (1.0 - eps) * b + eps * u).collect()
}

/// Dense, sparse or banded random PMF.
fn random_bins(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = match rng.random_range(0..3) {
        0 => (0..n).map(|_| rng.random::<f64>()).collect(),
        1 => (0..n).map(|_| if rng.random_bool(0.4) { rng.random::<f64>() } else { 0.0 }).collect(),
        _ => {
            let lo = rng.random_range(0..n);
            let hi = rng.random_range(lo + 1..=n);
            (0..n).map(|i| if (lo..hi).contains(&i) { rng.random::<f64>() } else { 0.0 }).collect()
        }
    };
    if v.iter().all(|x| *x == 0.0) {
        v[rng.random_range(0..n)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn pmf(bins: Vec<f64>) -> Pmf {
    Pmf::from_bins(bins, 1000).expect("normalized bins")
}

fn random_sim_config(rng: &mut ChaCha8Rng) -> SimilarityConfig {
    if rng.random_bool(0.5) {
        SimilarityConfig::default()
    } else {
        SimilarityConfig {
            qc_window: rng.random_range(0..24),
            qc_sigma: rng.random_range(0.5..12.0),
            qc_exponent: rng.random_range(0.0..0.99),
        }
    }
}

const SYMMETRIC: [MeasureId; 6] = [
    MeasureId::QuadraticChi,
    MeasureId::NormalizedCrossCorrelation,
    MeasureId::Hellinger,
    MeasureId::Intersection,
    MeasureId::SymmetricKL,
    MeasureId::JensenShannon,
];

fn similarity_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = EmbedConfig::default().epsilon;
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let n = 1usize << rng.random_range(1..=8);
        let cfg = random_sim_config(&mut rng);
        let (pb, qb) = (random_bins(&mut rng, n), random_bins(&mut rng, n));
        let (p, q) = (pmf(pb.clone()), pmf(qb.clone()));
        let (ps, qs) = (smooth_for_divergence(&p, eps).unwrap(), smooth_for_divergence(&q, eps).unwrap());
        let (psb, qsb) = (o_smooth(&pb, eps), o_smooth(&qb, eps));
        let vector = measure_vector_smoothed(&p, &q, eps, &cfg).unwrap();
        for id in MeasureId::ALL {
            let smoothed = id.needs_smoothing();
            let (a, b) = if smoothed { (&ps, &qs) } else { (&p, &q) };
            let got = measure_with(id, a, b, &cfg).unwrap();
            let want = if smoothed { o_measure(id, &psb, &qsb, &cfg) } else { o_measure(id, &pb, &qb, &cfg) };
            worst = worst.max((got - want).abs() / want.abs().max(1.0));
            c.close(got, want, 1e-12, || format!("case {case} {} vs scalar oracle (n = {n})", id.name()));
            c.close(vector[id.ordinal()], want, 1e-12, || format!("case {case} {} vector form", id.name()));
            if SYMMETRIC.contains(&id) {
                let back = measure_with(id, b, a, &cfg).unwrap();
                c.expect(got == back, || format!("case {case} {} not symmetric: {got:e} vs {back:e}", id.name()));
            }
            let in_range = match id {
                MeasureId::JensenShannon => (0.0..=LN_2).contains(&got),
                MeasureId::Hellinger | MeasureId::Intersection | MeasureId::ModifiedKolmogorovSmirnov => (0.0..=1.0).contains(&got),
                MeasureId::NormalizedCrossCorrelation => (-1.0..=1.0).contains(&got),
                MeasureId::KullbackLeibler | MeasureId::SymmetricKL | MeasureId::QuadraticChi => got >= 0.0,
            };
            c.expect(in_range, || format!("case {case} {} = {got:e} out of range", id.name()));
            let me = if smoothed { &ps } else { &p };
            let self_val = measure_with(id, me, me, &cfg).unwrap();
            let want_self = if id.is_similarity() { 1.0 } else { 0.0 };
            c.close(self_val, want_self, 1e-12, || format!("case {case} {}(p, p)", id.name()));
        }
    }
    let kl = measure_with(
        MeasureId::KullbackLeibler,
        &pmf(vec![0.5, 0.5]),
        &pmf(vec![0.25, 0.75]),
        &SimilarityConfig::default(),
    )
    .unwrap();
    let hand = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
    c.close(kl, hand, 1e-12, || "KL([.5,.5] || [.25,.75])".into());
    c.note(format!("1000 random pairs; max deviation from scalar oracle {worst:.2e}; KL example {kl:.12}"));
}

// ---------------------------------------------------------------------------
// embedding

const CHANNELS: usize = 20;
const MEASURES: usize = 8;

fn random_model(rng: &mut ChaCha8Rng, name: &str, n: usize) -> PmfGroupModel {
    PmfGroupModel {
        group_name: name.into(),
        channel_pmfs: (0..CHANNELS).map(|_| pmf(random_bins(rng, n))).collect(),
        file_count: 1,
    }
}

fn embedding_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let n = 1usize << rng.random_range(1..=7);
        let cfg = EmbedConfig { similarity: random_sim_config(&mut rng), ..EmbedConfig::default() };
        let a = random_model(&mut rng, "genuine", n);
        let b = random_model(&mut rng, "spoof", n);
        let x: Vec<Pmf> = (0..CHANNELS).map(|_| pmf(random_bins(&mut rng, n))).collect();
        let ab = Embedder::new(a.clone(), b.clone(), cfg.clone()).unwrap().embed(&x, "u").unwrap();
        let ba = Embedder::new(b.clone(), a.clone(), cfg.clone()).unwrap().embed(&x, "u").unwrap();
        let aa = Embedder::new(a.clone(), a.clone(), cfg.clone()).unwrap().embed(&x, "u").unwrap();
        c.expect(ab.values().len() == CHANNELS * MEASURES, || format!("case {case}: {} values", ab.values().len()));
        c.expect(ab.values().iter().all(|v| v.is_finite()), || format!("case {case}: non-finite value"));
        for (i, (u, v)) in ab.values().iter().zip(ba.values()).enumerate() {
            c.expect(*u == -*v, || format!("case {case} slot {i}: swap gives {v:e}, not -{u:e}"));
        }
        c.expect(aa.values().iter().all(|v| *v == 0.0), || format!("case {case}: equal models give a nonzero value"));

        // scalar loop: slot (n, l) = d_l(x_n, class2_n) - d_l(x_n, class1_n)
        for ch in 0..CHANNELS {
            let xb = x[ch].bins();
            let (m1, m2) = (a.channel_pmfs[ch].bins(), b.channel_pmfs[ch].bins());
            for (l, id) in MeasureId::ALL.iter().enumerate() {
                let d = |m: &[f64]| {
                    if id.needs_smoothing() {
                        o_measure(*id, &o_smooth(xb, cfg.epsilon), &o_smooth(m, cfg.epsilon), &cfg.similarity)
                    } else {
                        o_measure(*id, xb, m, &cfg.similarity)
                    }
                };
                let want = d(m2) - d(m1);
                let got = ab.values()[ch * MEASURES + l];
                worst = worst.max((got - want).abs() / want.abs().max(1.0));
                c.close(got, want, 1e-12, || format!("case {case} channel {ch} {}", id.name()));
            }
        }

        // 16 groups of 10: (measure, gammatone channels 0-9 | inverse channels 10-19)
        let g = regroup(&ab);
        for gi in 0..16 {
            let key = GroupKey::from_index(gi);
            let l = key.measure.ordinal();
            c.expect(gi == 2 * l + usize::from(key.inverse), || format!("group {gi} key order"));
            for k in 0..10 {
                let ch = k + if key.inverse { 10 } else { 0 };
                c.expect(g.groups[gi][k] == ab.values()[ch * MEASURES + l], || format!("case {case} group {gi} item {k}"));
            }
        }
        c.expect(g.flatten() == ab.values(), || format!("case {case}: flatten(regroup(e)) != e"));
        let mut orig = ab.values().to_vec();
        let mut grouped = g.to_group_major();
        orig.sort_by(f64::total_cmp);
        grouped.sort_by(f64::total_cmp);
        c.expect(orig == grouped, || format!("case {case}: grouped values are not a permutation"));
    }
    // index embedding: every position lands exactly once
    let idx: Vec<f64> = (0..160).map(|i| i as f64).collect();
    let mut seen: Vec<f64> = regroup_values(&idx).to_group_major();
    seen.sort_by(f64::total_cmp);
    c.expect(seen == idx, || "index embedding is not a bijection".into());
    c.note(format!("100 random cases; max deviation from scalar loop {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// metrics oracles: enumerate accept-if-score >= tau at every score and +inf

fn candidates(scores: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = scores.collect();
    v.push(f64::INFINITY);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn frac_lt(v: &[f64], t: f64) -> f64 {
    v.iter().filter(|s| **s < t).count() as f64 / v.len() as f64
}

fn frac_ge(v: &[f64], t: f64) -> f64 {
    v.iter().filter(|s| **s >= t).count() as f64 / v.len() as f64
}

fn o_eer(pos: &[f64], neg: &[f64]) -> f64 {
    let mut best = (f64::INFINITY, f64::NAN);
    for t in candidates(pos.iter().chain(neg).copied()) {
        let (pm, pf) = (frac_lt(pos, t), frac_ge(neg, t));
        if (pm - pf).abs() < best.0 {
            best = ((pm - pf).abs(), 0.5 * (pm + pf));
        }
    }
    best.1
}

fn o_dcf(tar: &[f64], non: &[f64], t: f64, k: &TandemCostModel) -> f64 {
    k.c_miss * k.pi_tar * frac_lt(tar, t) + k.c_fa * (1.0 - k.pi_tar) * frac_ge(non, t)
}

fn o_min_dcf(tar: &[f64], non: &[f64], k: &TandemCostModel) -> f64 {
    candidates(tar.iter().chain(non).copied()).into_iter().map(|t| o_dcf(tar, non, t, k)).fold(f64::INFINITY, f64::min)
}

struct Tandem {
    set: TandemScoreSet,
    cm_bona: Vec<f64>,
    cm_spoof: Vec<f64>,
    asv_tar: Vec<f64>,
    asv_non: Vec<f64>,
    asv_spf: Vec<f64>,
}

impl Tandem {
    fn new(set: TandemScoreSet) -> Self {
        let by = |f: &dyn Fn(&TandemEntry) -> bool, s: &dyn Fn(&TandemEntry) -> f64| -> Vec<f64> {
            set.entries.iter().filter(|e| f(e)).map(s).collect()
        };
        Self {
            cm_bona: by(&|e| e.class != TrialClass::Spoof, &|e| e.s_cm),
            cm_spoof: by(&|e| e.class == TrialClass::Spoof, &|e| e.s_cm),
            asv_tar: by(&|e| e.class == TrialClass::Target, &|e| e.s_asv),
            asv_non: by(&|e| e.class == TrialClass::NonTarget, &|e| e.s_asv),
            asv_spf: by(&|e| e.class == TrialClass::Spoof, &|e| e.s_asv),
            set,
        }
    }

    /// The two-threshold tandem cost written out term by term.
    fn tdcf(&self, tcm: f64, tasv: f64, k: &TandemCostModel) -> f64 {
        let pm_cm = frac_lt(&self.cm_bona, tcm);
        let pfa_cm = frac_ge(&self.cm_spoof, tcm);
        let pm_asv = frac_lt(&self.asv_tar, tasv);
        let pfa_asv = frac_ge(&self.asv_non, tasv);
        let pfa_sp = frac_ge(&self.asv_spf, tasv);
        k.c_miss * k.pi_tar * ((1.0 - pm_cm) * pm_asv + pm_cm)
            + k.c_fa * k.pi_non * (1.0 - pm_cm) * pfa_asv
            + k.c_fa_spoof * k.pi_spoof * pfa_cm * pfa_sp
    }

    fn cm_taus(&self) -> Vec<f64> {
        candidates(self.cm_bona.iter().chain(&self.cm_spoof).copied())
    }

    fn asv_taus(&self) -> Vec<f64> {
        candidates(self.asv_tar.iter().chain(&self.asv_non).chain(&self.asv_spf).copied())
    }

    /// Gated a-DCF: a trial rejected by the CM is rejected by the system.
    fn adcf(&self, tcm: f64, t: f64, k: &TandemCostModel) -> f64 {
        let acc = |class: TrialClass| {
            let v: Vec<&TandemEntry> = self.set.entries.iter().filter(|e| e.class == class).collect();
            v.iter().filter(|e| e.s_cm >= tcm && e.s_asv >= t).count() as f64 / v.len() as f64
        };
        k.c_miss * k.pi_tar * (1.0 - acc(TrialClass::Target))
            + k.c_fa * k.pi_non * acc(TrialClass::NonTarget)
            + k.c_fa_spoof * k.pi_spoof * acc(TrialClass::Spoof)
    }
}

fn default_cost(k: &TandemCostModel) -> f64 {
    (k.c_fa * k.pi_non + k.c_fa_spoof * k.pi_spoof).min(k.c_miss * k.pi_tar)
}

fn random_tandem(rng: &mut ChaCha8Rng, n: usize, quantized: bool) -> TandemScoreSet {
    let spread = rng.random_range(0.3..3.0);
    let noise = Normal::new(0.0, spread).unwrap();
    let q = |x: f64| if quantized { (x * 2.0).round() / 2.0 } else { x };
    let entries = (0..n)
        .map(|i| {
            let class = if i < 3 { TrialClass::ALL[i] } else { TrialClass::ALL[rng.random_range(0..3)] };
            let (mc, ma) = match class {
                TrialClass::Target => (1.0, 1.5),
                TrialClass::NonTarget => (1.0, -1.5),
                TrialClass::Spoof => (-1.0, 1.0),
            };
            TandemEntry {
                trial_id: format!("t{i}"),
                gender: Gender::Unknown,
                class,
                s_cm: q(mc + noise.sample(rng)),
                s_asv: q(ma + noise.sample(rng)),
            }
        })
        .collect();
    TandemScoreSet::new(entries).unwrap()
}

fn random_cost(rng: &mut ChaCha8Rng) -> TandemCostModel {
    if rng.random_bool(0.5) {
        return TandemCostModel::default();
    }
    let w: [f64; 3] = [rng.random_range(0.05..1.0), rng.random_range(0.05..1.0), rng.random_range(0.05..1.0)];
    let s: f64 = w.iter().sum();
    let pi_tar = w[0] / s;
    let pi_non = w[1] / s;
    TandemCostModel {
        pi_tar,
        pi_non,
        pi_spoof: 1.0 - pi_tar - pi_non,
        c_miss: rng.random_range(0.5..10.0),
        c_fa: rng.random_range(0.5..10.0),
        c_fa_spoof: rng.random_range(0.5..10.0),
    }
}

fn metrics_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in 0..200 {
        let n = rng.random_range(6..=200);
        let t = Tandem::new(random_tandem(&mut rng, n, case % 2 == 1));
        let k = random_cost(&mut rng);
        let cm = t.set.cm();
        let asv = t.set.asv();
        let asv_nonspoof = TrialScoreSet { entries: asv.entries.iter().filter(|e| e.class != TrialClass::Spoof).cloned().collect() };
        let at = |what: &str| format!("set {case} (n = {n}) {what}");

        // EER of both tasks
        c.close(eer(&cm, Task::Cm).unwrap().0, o_eer(&t.cm_bona, &t.cm_spoof), 1e-12, || at("CM EER"));
        c.close(eer(&asv_nonspoof, Task::Asv).unwrap().0, o_eer(&t.asv_tar, &t.asv_non), 1e-12, || at("ASV EER"));

        // DCF at a few thresholds and its minimum
        for kk in [k, TandemCostModel::asv_only()] {
            for &tau in t.asv_taus().iter().step_by(7) {
                c.close(dcf(&asv_nonspoof, tau, &kk).unwrap(), o_dcf(&t.asv_tar, &t.asv_non, tau, &kk), 1e-12, || at("DCF"));
            }
            c.close(min_dcf(&asv_nonspoof, &kk).unwrap().0, o_min_dcf(&t.asv_tar, &t.asv_non, &kk), 1e-12, || at("min DCF"));
        }

        // unconstrained t-DCF: pointwise and the joint minimum
        let (cm_taus, asv_taus) = (t.cm_taus(), t.asv_taus());
        let mut best = f64::INFINITY;
        for &ta in &asv_taus {
            for &tc in &cm_taus {
                best = best.min(t.tdcf(tc, ta, &k));
            }
        }
        for (&tc, &ta) in cm_taus.iter().step_by(5).zip(asv_taus.iter().step_by(3)) {
            c.close(tdcf_unconstrained(&cm, &asv, tc, ta, &k).unwrap(), t.tdcf(tc, ta, &k), 1e-12, || at("t-DCF"));
        }
        let got = min_tdcf_unconstrained(&cm, &asv, &k, None).unwrap().value;
        c.close(got, best / default_cost(&k), 1e-12, || at("min unconstrained t-DCF"));

        // constrained form at the ASV EER threshold equals the unconstrained one
        let (rates, tau_asv) = asv_rates_at_eer(&asv).unwrap();
        let direct = asv_rates_at(&asv, tau_asv).unwrap();
        c.expect(rates == direct, || at("rates at the returned ASV threshold"));
        c.close(direct.p_fa_spoof, frac_ge(&t.asv_spf, tau_asv), 1e-15, || at("P_fa,spoof"));
        let at_eer = 0.5 * (frac_lt(&t.asv_tar, tau_asv) + frac_ge(&t.asv_non, tau_asv));
        c.close(at_eer, o_eer(&t.asv_tar, &t.asv_non), 1e-12, || at("ASV threshold is not at the EER"));
        let miss = k.pi_tar * k.c_miss * frac_lt(&t.asv_tar, tau_asv);
        let fa = k.pi_non * k.c_fa * frac_ge(&t.asv_non, tau_asv);
        let (c0, c1, c2) = (miss + fa, k.pi_tar * k.c_miss - miss - fa, k.pi_spoof * k.c_fa_spoof * frac_ge(&t.asv_spf, tau_asv));
        if c1 >= 0.0 {
            let mut cbest = f64::INFINITY;
            for &tc in &cm_taus {
                let u = t.tdcf(tc, tau_asv, &k);
                cbest = cbest.min(u);
                let v = tdcf_asv_constrained(&cm, &rates, tc, &k, C1Convention::Consistent).unwrap();
                c.close(v, u, 1e-12, || at("constrained vs unconstrained at the ASV EER threshold"));
            }
            let got = min_tdcf_constrained(&cm, &rates, &k, C1Convention::Consistent).unwrap().value;
            c.close(got, cbest / (c0 + c1.min(c2)), 1e-12, || at("min constrained t-DCF"));
        }

        // a-DCF: pointwise and the joint minimum over CM and system thresholds
        let mut abest = f64::INFINITY;
        for &tc in &cm_taus {
            for &ta in &asv_taus {
                abest = abest.min(t.adcf(tc, ta, &k));
            }
        }
        for (&tc, &ta) in cm_taus.iter().step_by(4).zip(asv_taus.iter().step_by(6)) {
            c.close(adcf(&t.set, tc, ta, &k).unwrap(), t.adcf(tc, ta, &k), 1e-12, || at("a-DCF"));
        }
        let got = min_adcf_joint(&t.set, &k, None).unwrap().value;
        c.close(got, abest / default_cost(&k), 1e-12, || at("min a-DCF"));

        // strictly increasing maps of either score leave every normalized minimum unchanged
        let f = |x: f64| x.exp();
        let g = |x: f64| 3.0 * x.atan() - 1.0;
        let mapped = TandemScoreSet::new(
            t.set.entries.iter().map(|e| TandemEntry { s_cm: f(e.s_cm), s_asv: g(e.s_asv), ..e.clone() }).collect(),
        )
        .unwrap();
        let (mcm, masv) = (mapped.cm(), mapped.asv());
        let masv_ns = TrialScoreSet { entries: masv.entries.iter().filter(|e| e.class != TrialClass::Spoof).cloned().collect() };
        let same = |a: f64, b: f64| a == b;
        c.expect(same(eer(&cm, Task::Cm).unwrap().0, eer(&mcm, Task::Cm).unwrap().0), || at("EER changed under remap"));
        c.expect(same(min_dcf(&asv_nonspoof, &k).unwrap().0, min_dcf(&masv_ns, &k).unwrap().0), || at("min DCF changed"));
        c.expect(
            same(
                min_tdcf_unconstrained(&cm, &asv, &k, None).unwrap().value,
                min_tdcf_unconstrained(&mcm, &masv, &k, None).unwrap().value,
            ),
            || at("min unconstrained t-DCF changed"),
        );
        if c1 >= 0.0 {
            let r2 = asv_rates_at_eer(&masv).unwrap().0;
            c.expect(
                same(
                    min_tdcf_constrained(&cm, &rates, &k, C1Convention::Consistent).unwrap().value,
                    min_tdcf_constrained(&mcm, &r2, &k, C1Convention::Consistent).unwrap().value,
                ),
                || at("min constrained t-DCF changed"),
            );
        }
        c.expect(
            same(min_adcf_joint(&t.set, &k, None).unwrap().value, min_adcf_joint(&mapped, &k, None).unwrap().value),
            || at("min a-DCF changed"),
        );
    }
    c.note("200 random sets, half with tied scores, random and default cost models");
}

// ---------------------------------------------------------------------------
// bootstrap

fn bootstrap_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let set = random_tandem(&mut rng, 300, false).cm();
    let counts: Vec<usize> = TrialClass::ALL.iter().map(|&k| set.count(k)).collect();
    let cfg = BootstrapConfig { m: 1000, alpha_percent: 5.0, seed: 99, stratified: true };
    let seen = Mutex::new(Vec::new());
    let est = bootstrap_ci(
        &set,
        |s: &TrialScoreSet| {
            let v = eer(s, Task::Cm)?.0;
            let same_strata = TrialClass::ALL.iter().zip(&counts).all(|(&k, &n)| s.count(k) == n);
            seen.lock().unwrap().push((v, same_strata));
            Ok(v)
        },
        &cfg,
    )
    .unwrap();
    let seen = seen.into_inner().unwrap();
    c.expect(seen.len() == 1001, || format!("{} statistic calls, want 1001", seen.len()));
    c.expect(seen.iter().all(|s| s.1), || "a resample changed the class counts".into());
    let point = eer(&set, Task::Cm).unwrap().0;
    c.expect(est.value == point, || "point value is not the full-set statistic".into());
    // the point call runs first; the rest are the replicates
    let mut reps: Vec<f64> = seen[1..].iter().map(|s| s.0).collect();
    reps.sort_by(f64::total_cmp);
    let (lo, hi) = (reps[24], reps[975]);
    c.expect(est.percentile_low == lo, || format!("lower bound {} != 25th order statistic {lo}", est.percentile_low));
    c.expect(est.percentile_high == hi, || format!("upper bound {} != 976th order statistic {hi}", est.percentile_high));
    c.expect(est.ci_low == lo.min(point) && est.ci_high == hi.max(point), || "interval does not hold the point value".into());
    c.expect(est.n_bootstrap == 1000 && est.alpha_percent == 5.0, || "metadata".into());

    let k = bootstrap_ci(&set, |_: &TrialScoreSet| Ok(7.0), &cfg).unwrap();
    c.expect(
        [k.value, k.ci_low, k.ci_high, k.percentile_low, k.percentile_high].iter().all(|v| *v == 7.0),
        || format!("constant statistic gave {k:?}"),
    );

    let stat = |s: &TrialScoreSet| Ok(eer(s, Task::Cm)?.0);
    let again = bootstrap_ci(&set, stat, &cfg).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let threaded = pool.install(|| bootstrap_ci(&set, stat, &cfg).unwrap());
    c.expect(again == est && threaded == est, || "same seed gave a different interval".into());
    let other = Mutex::new(Vec::new());
    bootstrap_ci(
        &set,
        |s: &TrialScoreSet| {
            let v = eer(s, Task::Cm)?.0;
            other.lock().unwrap().push(v);
            Ok(v)
        },
        &BootstrapConfig { seed: 100, ..cfg },
    )
    .unwrap();
    let mut other: Vec<f64> = other.into_inner().unwrap()[1..].to_vec();
    other.sort_by(f64::total_cmp);
    c.expect(other != reps, || "another seed drew the same replicates".into());
    c.note(format!("EER {point:.4}, 95% interval [{:.4}, {:.4}] from order statistics 25 and 976", est.ci_low, est.ci_high));
}

// ---------------------------------------------------------------------------
// gradients

/// Central differences at `checks` random coordinates; returns the worst
/// `|g - fd| / max(|g|, |fd|, 1e-6)`.
fn fd_check(
    rng: &mut ChaCha8Rng,
    params: &[f64],
    checks: usize,
    f: impl Fn(&[f64]) -> (f64, Vec<f64>),
) -> (f64, usize) {
    let h = 1e-5;
    let (_, grad) = f(params);
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for _ in 0..checks {
        let i = rng.random_range(0..params.len());
        p[i] = params[i] + h;
        let up = f(&p).0;
        p[i] = params[i] - h;
        let down = f(&p).0;
        p[i] = params[i];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6));
    }
    (worst, checks)
}

fn gradient_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let tol = 1e-4;

    let d = 12;
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..d).map(|_| normal.sample(&mut rng)).collect()).collect();
    let labels: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
    let w: Vec<f64> = (0..=d).map(|_| normal.sample(&mut rng)).collect();
    let (worst, n) = fd_check(&mut rng, &w, 40, |p| logreg_objective(p, &rows, &labels, 1e-3));
    c.expect(worst <= tol, || format!("logistic regression: relative error {worst:.2e}"));
    c.note(format!("logistic regression: {n} coordinates, worst relative error {worst:.2e}"));

    let rows: Vec<Vec<f64>> = (0..24).map(|_| (0..160).map(|_| normal.sample(&mut rng)).collect()).collect();
    let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let labels: Vec<u8> = (0..24).map(|i| (i % 3 == 0) as u8).collect();
    for (name, spec) in [("grouped MLP sigmoid head", GroupedMlpSpec::male()), ("grouped MLP one-class head", GroupedMlpSpec::female())] {
        let net = GroupedMlp::initialize(&GroupedMlpSpec { seed: 3, ..spec }, Standardizer::identity(160)).unwrap();
        let params: Vec<f64> = net.params.iter().map(|p| p + 0.1 * normal.sample(&mut rng)).collect();
        let (worst, n) = fd_check(&mut rng, &params, 60, |p| net.loss_and_gradient(p, &refs, &labels).unwrap());
        c.expect(worst <= tol, || format!("{name}: relative error {worst:.2e}"));
        c.note(format!("{name}: {n} of {} coordinates, worst relative error {worst:.2e}", params.len()));
    }

    let ocs = OcSoftmaxParams::default();
    let scores: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
    let labels: Vec<u8> = (0..32).map(|i| (i % 2) as u8).collect();
    let (worst, n) = fd_check(&mut rng, &scores, 32, |s| oc_softmax_loss(s, &labels, &ocs).unwrap());
    c.expect(worst <= tol, || format!("one-class softmax loss: relative error {worst:.2e}"));
    c.note(format!("one-class softmax loss: {n} coordinates, worst relative error {worst:.2e}"));
}

// ---------------------------------------------------------------------------
// synthetic pipeline

fn pipeline(cfg: &RunConfig) -> (Option<f64>, Vec<EvalReport>) {
    let m = cmd_synth(cfg).unwrap();
    cmd_build_models(cfg, &m).unwrap();
    cmd_embed(cfg, &m, None).unwrap();
    let gender = (cfg.gender_mode == GenderMode::GenderDependent).then(|| cmd_train_gender(cfg, &m).unwrap().accuracy(Split::Eval));
    cmd_train_cm(cfg, &m).unwrap();
    cmd_score(cfg, &m).unwrap();
    (gender.flatten(), cmd_eval(cfg).unwrap())
}

fn eval_value(reports: &[EvalReport], group: Group, metric: Metric) -> f64 {
    reports.iter().find(|r| r.split == "eval").and_then(|r| r.get(group, metric)).map_or(f64::NAN, |e| e.value)
}

fn synthetic_suite(c: &mut Check) {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.paths.work_dir = dir.path().join("separated");
    let (acc, reports) = pipeline(&cfg);
    let acc = acc.unwrap_or(f64::NAN);
    let cm_eer = eval_value(&reports, Group::Pooled, Metric::CmEer);
    let tdcf = eval_value(&reports, Group::Pooled, Metric::MinTdcfConstrained);
    c.expect(acc >= 0.99, || format!("gender accuracy {acc:.4} < 0.99"));
    c.expect(cm_eer <= 0.02, || format!("CM EER {cm_eer:.4} > 0.02"));
    c.expect(tdcf <= 0.05, || format!("min t-DCF {tdcf:.4} > 0.05"));
    c.note(format!("separated: gender accuracy {acc:.4}, CM EER {cm_eer:.4}, min constrained t-DCF {tdcf:.4}"));

    let mut cfg = RunConfig::default();
    cfg.paths.work_dir = dir.path().join("overlap");
    cfg.synth.overlap = 1.0;
    cfg.synth.eval_bonafide = 50;
    cfg.synth.eval_spoof = 100;
    let (_, reports) = pipeline(&cfg);
    let tdcf = eval_value(&reports, Group::Pooled, Metric::MinTdcfConstrained);
    c.expect((0.9..=1.0 + 1e-9).contains(&tdcf), || format!("random-CM min t-DCF {tdcf:.4} outside [0.9, 1]"));
    c.note(format!("overlapping: min constrained t-DCF {tdcf:.4}"));
}

// ---------------------------------------------------------------------------
// fusion

fn gaussian_pairs(rng: &mut ChaCha8Rng, n: usize, d_gd: f64, d_lfcc: f64) -> PairedScores {
    let z = Normal::new(0.0, 1.0).unwrap();
    PairedScores {
        trials: (0..n)
            .map(|i| {
                let class = [TrialClass::Target, TrialClass::NonTarget, TrialClass::Spoof, TrialClass::Spoof][i % 4];
                let s = if class.is_bonafide() { 0.5 } else { -0.5 };
                PairedTrial {
                    trial_id: format!("t{i}"),
                    gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
                    class,
                    gd: s * d_gd + z.sample(rng),
                    lfcc: s * d_lfcc + z.sample(rng),
                }
            })
            .collect(),
    }
}

fn cm_eer_of(p: &PairedScores, f: impl Fn(&PairedTrial) -> f64) -> f64 {
    let bona: Vec<f64> = p.trials.iter().filter(|t| t.class.is_bonafide()).map(&f).collect();
    let spoof: Vec<f64> = p.trials.iter().filter(|t| !t.class.is_bonafide()).map(&f).collect();
    o_eer(&bona, &spoof)
}

fn fusion_suite(c: &mut Check) {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..1000 {
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        c.expect(fuse_weighted(a, b, 1.0).unwrap() == a && fuse_weighted(a, b, 0.0).unwrap() == b, || "scalar endpoints".into());
    }
    let pairs = gaussian_pairs(&mut rng, 400, 2.0, 1.5);
    let one = pairs.fuse_weighted(1.0).unwrap();
    let zero = pairs.fuse_weighted(0.0).unwrap();
    c.expect(pairs.trials.iter().zip(&one.entries).all(|(t, e)| e.score == t.gd), || "alpha = 1 is not the first stream".into());
    c.expect(pairs.trials.iter().zip(&zero.entries).all(|(t, e)| e.score == t.lfcc), || "alpha = 0 is not the second stream".into());

    // exhaustive grid: every alpha, brute-force EER, smallest alpha on ties
    for (case, step) in [0.01, 0.05, 0.1, 0.25, 0.5].into_iter().enumerate() {
        let p = gaussian_pairs(&mut rng, 60 + 40 * case, 1.0 + case as f64 * 0.3, 1.2);
        let sweep = sweep_alpha(&p, step).unwrap();
        let grid = alpha_grid(step).unwrap();
        c.expect(grid.first() == Some(&0.0) && grid.last() == Some(&1.0), || "grid ends".into());
        let mut best = (f64::NAN, f64::INFINITY);
        for (i, &a) in grid.iter().enumerate() {
            let e = cm_eer_of(&p, |t| a * t.gd + (1.0 - a) * t.lfcc);
            if e < best.1 {
                best = (a, e);
            }
            c.expect(sweep.curve.get(i).is_some_and(|&(ga, ge)| ga == a && (ge - e).abs() <= 1e-12), || {
                format!("step {step}: sweep point {i} differs from oracle")
            });
        }
        c.expect(sweep.best_alpha == best.0 && (sweep.best_eer - best.1).abs() <= 1e-12, || {
            format!("step {step}: best alpha {} vs oracle {}", sweep.best_alpha, best.0)
        });
    }

    let train = gaussian_pairs(&mut rng, 3000, 2.0, 1.5);
    let dev = gaussian_pairs(&mut rng, 3000, 2.0, 1.5);
    let eval = gaussian_pairs(&mut rng, 8000, 2.0, 1.5);
    let e_gd = cm_eer_of(&eval, |t| t.gd);
    let e_lf = cm_eer_of(&eval, |t| t.lfcc);
    let (better, worse) = (e_gd.min(e_lf), e_gd.max(e_lf));
    for kind in [FusionClassifierKind::LogisticRegression, FusionClassifierKind::Gbdt] {
        let tuned = tune_fusion_classifier(&train, &dev, kind, &LogregParams::default(), &GbdtParams::default()).unwrap();
        let fused = score_pairs(&tuned.model, &eval).unwrap();
        let e = eer(&fused, Task::Cm).unwrap().0;
        c.expect(e < worse, || format!("{kind:?}: fused EER {e:.4} not below the worse stream {worse:.4}"));
        c.expect(e <= better + 0.005, || format!("{kind:?}: fused EER {e:.4} more than 0.5 pp above {better:.4}"));
        c.note(format!("{kind:?}: fused EER {e:.4}; streams {e_gd:.4} and {e_lf:.4}"));
    }
}

// ---------------------------------------------------------------------------
// optional corpus run

const DATASET_ENV: &str = "SASV_ASVSPOOF2019_CONFIG";

fn dataset_suite(c: &mut Check, path: PathBuf) {
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.gender_mode = GenderMode::OracleLabels;
    let m = sasv_time::pipeline::Manifest::read(cfg.manifest_path()).unwrap();
    cmd_build_models(&cfg, &m).unwrap();
    cmd_embed(&cfg, &m, None).unwrap();
    cmd_train_cm(&cfg, &m).unwrap();
    cmd_score(&cfg, &m).unwrap();
    let reports = cmd_eval(&cfg).unwrap();
    let checks = [
        (Group::Male, Metric::CmEer, 100.0, (7.10, 10.19)),
        (Group::Female, Metric::CmEer, 100.0, (8.61, 12.03)),
        (Group::Male, Metric::MinTdcfConstrained, 1.0, (0.1871, 0.2413)),
        (Group::Female, Metric::MinTdcfConstrained, 1.0, (0.2656, 0.3158)),
    ];
    for (g, metric, scale, (lo, hi)) in checks {
        let v = eval_value(&reports, g, metric) * scale;
        c.expect((lo..=hi).contains(&v), || format!("{} {}: {v:.4} outside [{lo}, {hi}]", g.name(), metric.name()));
        c.note(format!("{} {}: {v:.4} (published interval [{lo}, {hi}])", g.name(), metric.name()));
    }
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut out = vec![
        run("similarity: invariants and scalar oracle on 1000 pairs", Duration::from_secs(30), similarity_suite),
        run("embedding: antisymmetry, zero on equal models, layout, scalar loop", min(1), embedding_suite),
        run("metrics: EER, DCF, t-DCF and a-DCF against threshold enumeration", min(2), metrics_suite),
        run("bootstrap: order statistics, degenerate interval, determinism", min(1), bootstrap_suite),
        run("gradients: logistic regression, grouped MLP heads, one-class softmax", min(2), gradient_suite),
        run("synthetic end-to-end: separated and overlapping families", min(10), synthetic_suite),
        run("fusion: endpoints, alpha sweep, classifier fusion", min(2), fusion_suite),
    ];
    let name = "ASVspoof 2019 LA: per-gender CM EER and min t-DCF within published intervals";
    match std::env::var_os(DATASET_ENV) {
        Some(p) => out.push(run(name, Duration::MAX, |c| dataset_suite(c, p.into()))),
        None => {
            println!("[SKIP] {name} (set {DATASET_ENV} to a config whose work_dir holds the corpus manifest and ASV scores)");
            out.push(Outcome { name, pass: true, skipped: true });
        }
    }
    let failed: Vec<&str> = out.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    let ran = out.iter().filter(|o| !o.skipped).count();
    println!("{} of {ran} criteria passed", ran - failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
