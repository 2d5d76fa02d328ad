//! Writes a synthetic MIDI corpus: `synth_corpus <dir> <n> <seed>`.

fn main() -> std::io::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    if args.len() != 4 {
        eprintln!("usage: synth_corpus <dir> <n> <seed>");
        std::process::exit(2);
    }
    let n = args[2].parse().expect("n must be an integer");
    let seed = args[3].parse().expect("seed must be an integer");
    fmd_core::synth::write_synth_corpus(std::path::Path::new(&args[1]), n, seed)
}
