mod args;
mod run;

fn main() {
    let cli = match args::parse_args(std::env::args_os()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    std::process::exit(run::execute(cli.command));
}
