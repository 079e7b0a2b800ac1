//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `BRWLAB_TIER` selects `fast` or `full` (default `full`), `BRWLAB_SEED`
//! the master seed (default 1) and `BRWLAB_WORKERS` the thread count
//! (default: available cores). Evidence CSVs land under
//! `target/tmp/acceptance/`.

use std::process::ExitCode;

use brwlab::check::{run_all, CheckContext, Status, Tier};

fn env_or<T: std::str::FromStr>(key: &str, default: T) -> T {
    std::env::var(key).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn main() -> ExitCode {
    // the harness passes libtest flags such as --list; there are no named tests
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let tier = match std::env::var("BRWLAB_TIER") {
        Ok(t) => match t.parse::<Tier>() {
            Ok(t) => t,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::FAILURE;
            }
        },
        Err(_) => Tier::Full,
    };
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let ctx = CheckContext::new(
        std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance"),
        env_or("BRWLAB_SEED", 1),
        env_or("BRWLAB_WORKERS", cores),
        tier,
    );
    println!("acceptance tier {tier}, seed {}, {} workers, output {}", ctx.seed, ctx.workers, ctx.out.display());
    let results = run_all(&ctx, |r| println!("{r}"));
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    let passed = results.iter().filter(|r| r.status == Status::Pass).count();
    let skipped = results.len() - failed - passed;
    println!("acceptance: {passed} passed, {failed} failed, {skipped} skipped");
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
