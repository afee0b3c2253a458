fn main() -> std::process::ExitCode {
    bidsim::cli::main_exit()
}
