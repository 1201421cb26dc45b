fn main() -> std::process::ExitCode {
    tacmap::cli::main()
}
