use std::io::Write;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(threads) = std::env::var("CPL_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
        {
            log::warn!("CPL_THREADS ignored: {e}");
        }
    }
    let mut stdout = std::io::stdout().lock();
    let code = cpl::cli::main_with_args(std::env::args_os(), &mut stdout);
    let _ = stdout.flush();
    std::process::exit(code);
}
