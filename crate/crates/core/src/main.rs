fn main() -> std::process::ExitCode {
    depthfield::cli::main()
}
