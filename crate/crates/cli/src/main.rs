fn main() {
    let env = |k: &str| std::env::var(k).ok();
    let code = dissipator_cli::run(
        std::env::args_os(),
        &env,
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
