//! Prints the 20-channel front end: centre frequencies, bandwidths and the
//! magnitude response of each channel at a few probe frequencies.

use sasv_time::filterbank::{design_bank, FilterBankConfig, FilterKind};

fn main() {
    let fs = 16000;
    let bank = design_bank(fs, &FilterBankConfig::default()).expect("bank");
    let probes = [100.0, 500.0, 1000.0, 2000.0, 4000.0, 7000.0];
    print!("{:>3} {:<10} {:>8} {:>8}", "ch", "kind", "fc_hz", "bw_hz");
    for p in probes {
        print!(" {:>8}", format!("|H|@{p}"));
    }
    println!();
    for (i, c) in bank.channels().iter().enumerate() {
        print!("{:>3} {:<10} {:>8.1} {:>8.1}", i + 1, match c.kind {
            FilterKind::Gammatone => "gt",
            FilterKind::InverseGammatone => "inv_gt",
        }, c.center_freq_hz, c.bandwidth_hz);
        for p in probes {
            print!(" {:>8.4}", c.magnitude(p, fs));
        }
        println!();
    }
    for c in [&bank.channels()[0], &bank.channels()[9]] {
        let h = c.impulse_response(4096);
        let peak = (0..h.len()).max_by(|&a, &b| h[a].abs().total_cmp(&h[b].abs())).unwrap();
        println!("{:.0} Hz gammatone: impulse response peaks at sample {peak} ({:.2} ms)", c.center_freq_hz, peak as f64 / fs as f64 * 1e3);
    }
}
