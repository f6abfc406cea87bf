//! One line per acceptance criterion, then a hard failure if any missed.

use lowreg_core::{run_suite, SuiteConfig, VerificationCase, VerificationReport};

struct Criterion {
    id: usize,
    name: &'static str,
    cases: Vec<VerificationCase>,
}

impl Criterion {
    fn from_report(id: usize, name: &'static str, r: &VerificationReport) -> Self {
        Criterion { id, name, cases: r.cases.clone() }
    }

    fn passed(&self) -> bool {
        !self.cases.is_empty() && self.cases.iter().all(|c| c.pass)
    }
}

fn main() {
    let cfg = SuiteConfig::default();
    let run = |name: &str| run_suite(name, &cfg).unwrap_or_else(|e| panic!("suite {name}: {e}"));

    let order = [
        (1, "smooth-equality"),
        (2, "continuous-equality"),
        (3, "cantor-gap"),
        (4, "lipschitz-dac"),
        (5, "density-lambda-eta"),
        (6, "mollify-sandwich"),
        (7, "derivative-equality"),
        (8, "equivalence-constants"),
        (9, "metric-axioms"),
        (10, "snowflake-counterexample"),
    ];
    let mut criteria = Vec::new();
    let mut universality = Vec::new();
    for (id, name) in order {
        let r = run(name);
        if id <= 2 {
            universality.extend(r.cases.iter().filter(|c| c.name.starts_with("ld_le_l:")).cloned());
        }
        criteria.push(Criterion::from_report(id, name, &r));
    }
    criteria.push(Criterion { id: 11, name: "ld-le-l-universality", cases: universality });

    for c in &criteria {
        let ok = c.cases.iter().filter(|x| x.pass).count();
        println!(
            "criterion {:>2} {:<26} {} ({ok}/{} cases)",
            c.id,
            c.name,
            if c.passed() { "PASS" } else { "FAIL" },
            c.cases.len()
        );
        for f in c.cases.iter().filter(|x| !x.pass) {
            println!("    {} observed {:?} expected {} tol {} {}", f.name, f.observed, f.expected, f.tolerance, f.detail);
        }
    }
    let failed: Vec<usize> = criteria.iter().filter(|c| !c.passed()).map(|c| c.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria pass", criteria.len());
}
