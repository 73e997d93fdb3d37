fn main() -> std::process::ExitCode {
    hdrfield::cli::main()
}
