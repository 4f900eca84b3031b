fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(qmpe_lab::main_with_args(std::env::args_os()))
}
