fn main() -> std::process::ExitCode {
    movesort::cli::main()
}
