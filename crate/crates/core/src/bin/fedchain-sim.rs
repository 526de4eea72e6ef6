fn main() -> std::process::ExitCode {
    fedchain::harness::cli::main()
}
