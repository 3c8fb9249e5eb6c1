//! Drives the command-line front end in process.

use bounded_pd::cli::{run, Cli};
use clap::Parser;

fn main() {
    for args in [
        vec!["pdsim", "match", "GRIM", "GRIM", "--N", "10", "--table", "intro"],
        vec!["pdsim", "match", "AllD", "AllC", "--N", "5"],
        vec!["pdsim", "analyze", "--oft-constant", "--q", "0.25", "--r", "2"],
        vec!["pdsim", "analyze", "AllC", "--gamma", "all-AllD", "--N", "10"],
    ] {
        println!("$ {}", args[1..].join(" "));
        let cli = Cli::try_parse_from(args).unwrap();
        run(&cli, &mut std::io::stdout()).unwrap();
    }
}
