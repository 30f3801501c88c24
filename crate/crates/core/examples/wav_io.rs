//! Writes a tone to a 16-bit WAV file, reads it back and clips an
//! over-driven copy to [-1, 1].

use sasv_time::audio_io::{clip_to_unit, read_audio, write_wav};

fn main() {
    let fs = 16000;
    let tone: Vec<f64> = (0..fs).map(|n| 0.8 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / fs as f64).sin()).collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("tone.wav");
    write_wav(&path, &tone, fs as u32).expect("write");

    let back = read_audio(&path).expect("read");
    let err = tone.iter().zip(back.samples()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("{}: {} samples at {} Hz, max quantization error {err:.2e}", back.source_id(), back.len(), back.sample_rate_hz());

    let loud: Vec<f64> = tone.iter().map(|v| 1.5 * v).collect();
    let clipped = clip_to_unit(&loud).expect("finite");
    let at_rail = clipped.iter().filter(|v| v.abs() == 1.0).count();
    println!("gain 1.5: {at_rail} of {} samples clipped", clipped.len());
}
