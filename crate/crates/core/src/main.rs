fn main() -> std::process::ExitCode {
    splf::cli::main_entry()
}
