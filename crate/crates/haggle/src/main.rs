fn main() {
    // Die quietly when stdout is piped into something like `head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(haggle::cli::run());
}
