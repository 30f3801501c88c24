//! EER, minDCF, constrained and unconstrained min t-DCF and min a-DCF on
//! seeded Gaussian tandem scores.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sasv_time::labels::{Gender, TrialClass};
use sasv_time::metrics::{
    asv_rates_at_eer, eer, min_adcf_joint, min_dcf, min_tdcf_constrained, min_tdcf_unconstrained, C1Convention,
    TandemCostModel, TandemEntry, TandemScoreSet, Task,
};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = Normal::new(0.0, 1.0).unwrap();
    let entries = (0..900)
        .map(|i| {
            let class = TrialClass::ALL[i % 3];
            let (cm, asv) = match class {
                TrialClass::Target => (2.0, 3.0),
                TrialClass::NonTarget => (2.0, -3.0),
                TrialClass::Spoof => (-1.0, 2.0),
            };
            TandemEntry {
                trial_id: format!("t{i}"),
                gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
                class,
                s_cm: cm + n.sample(&mut rng),
                s_asv: asv + n.sample(&mut rng),
            }
        })
        .collect();
    let t = TandemScoreSet::new(entries).unwrap();
    let cost = TandemCostModel::default();
    let (cm, asv) = (t.cm(), t.asv());

    let (cm_eer, cm_tau) = eer(&cm, Task::Cm).unwrap();
    println!("CM EER {:.4} at threshold {cm_tau:.4}", cm_eer);
    let (asv_eer, _) = eer(&asv, Task::Asv).unwrap();
    println!("ASV EER {asv_eer:.4}, minDCF {:.4}", min_dcf(&asv, &TandemCostModel::asv_only()).unwrap().0);
    let (rates, tau_asv) = asv_rates_at_eer(&asv).unwrap();
    println!("ASV at EER threshold {tau_asv:.4}: {rates:?}");
    for conv in [C1Convention::Consistent, C1Convention::AsPrinted] {
        let m = min_tdcf_constrained(&cm, &rates, &cost, conv).unwrap();
        println!("constrained min t-DCF ({conv:?}) {:.6} at tau_cm {:.4}", m.value, m.tau_cm);
    }
    let u = min_tdcf_unconstrained(&cm, &asv, &cost, Some(200)).unwrap();
    println!("unconstrained min t-DCF {:.6} at ({:.4}, {:.4})", u.value, u.tau_cm, u.tau_asv);
    let a = min_adcf_joint(&t, &cost, Some(200)).unwrap();
    println!("min a-DCF {:.6} at ({:.4}, {:.4})", a.value, a.tau_cm, a.tau);
}
