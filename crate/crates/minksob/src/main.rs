fn main() {
    if let Ok(threads) = std::env::var("MINKSOB_THREADS") {
        match threads.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(err) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the thread pool: {err}");
                }
            }
            _ => eprintln!("warning: ignoring invalid MINKSOB_THREADS={threads:?}"),
        }
    }
    std::process::exit(minksob::cli::run());
}
