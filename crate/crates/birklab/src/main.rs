fn main() {
    // Die quietly when stdout is a closed pipe (e.g. `birklab cf … | head`);
    // Rust ignores SIGPIPE by default, turning EPIPE into a panic.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    std::process::exit(birklab::cli::run());
}
