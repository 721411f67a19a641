use std::io;

fn main() {
    let env_seed = std::env::var(dyskew::cli::SEED_ENV).ok();
    let code = dyskew::cli::main_with(
        std::env::args_os(),
        env_seed.as_deref(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    );
    std::process::exit(code);
}
