fn main() -> std::process::ExitCode {
    edgescale::cli::main()
}
