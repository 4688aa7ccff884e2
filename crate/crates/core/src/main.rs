fn main() -> std::process::ExitCode {
    collusion::cli::main()
}
