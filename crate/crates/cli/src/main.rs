//! Command-line front end: exact-arithmetic checks for crystalline and
//! syntomic data. Reports are JSON on stdout; timings go to stderr. Exit
//! codes: 0 success, 1 check failure, 2 usage error.

mod doc;

use std::collections::BTreeMap;
use std::io::Read;
use std::process::ExitCode;
use std::time::Instant;

use doc::{CrystalDoc, RunReport};
use serde_json::json;
use syntomic::acris::{frobenius_intersection, pd_log_unit};
use syntomic::acris::{AcrisWindow, FracExp, TateUnit};
use syntomic::battery::{run_battery, ALL_IDS, QUICK_IDS};
use syntomic::cech::{h_modp, CechWindow};
use syntomic::fcrystal::{
    av_cohomology, direct_sum, fppf_groups, newton_polygon, ordinary_av_h1,
    standard_slope_module, supersingular_e_h1, FCrystal,
};
use syntomic::padic::{make_field, GaloisRing};
use syntomic::syntomic::verify_syntomic_exactness;

const USAGE: &str = "usage: syntomic <command> [--flag value ...]

commands:
  field          --p P --f F
  teich          --p P [--N N] --a A            Teichmüller lift of a residue
  acris-exact    --p P --f F --vars V --depth D [--samples S] [--seed S]
  acris-log      --p P [--N N] --coeff C --num NUM [--den E] [--power K]
  acris-inf      --p P [--N N] --depth D [--nmax M] [--max-int I]
  fcrystal-new   --preset NAME [--g G] [--p P] [--N N] | reads a CrystalDoc on stdin
  fcrystal-slopes  (crystal flags as above)
  fcrystal-fppf  --preset NAME [--g G] [--p P] [--N N] [--levels L] [--extra E]
  fcrystal-brauer --ns-rank R [--preset supersingular-exe]
  cech-h         --p P --degree {0|1} [--x-deg D] [--depth DEPTH]
  selftest       [--level quick|full] [--seed S]

presets: ordinary-av (with --g), supersingular-exe, slope-module (--r R --s S)
environment: SYNTOMIC_PRECISION sets the default N";

struct Args {
    flags: BTreeMap<String, String>,
}

impl Args {
    fn get(&self, key: &str) -> Option<&str> {
        self.flags.get(key).map(|s| s.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.flags.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("flag --{key}: cannot parse {v:?}")),
        }
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T, String> {
        self.parse(key)?.ok_or_else(|| format!("missing required flag --{key}"))
    }

    fn seed(&self) -> Result<u64, String> {
        Ok(self.parse::<u64>("seed")?.unwrap_or(20260808))
    }

    fn precision(&self, fallback: u32) -> Result<u32, String> {
        if let Some(n) = self.parse::<u32>("N")? {
            return Ok(n);
        }
        if let Ok(env) = std::env::var("SYNTOMIC_PRECISION") {
            return env.parse().map_err(|_| format!("SYNTOMIC_PRECISION: bad value {env:?}"));
        }
        Ok(fallback)
    }
}

fn parse_args(argv: &[String]) -> Result<(String, Args), String> {
    if argv.is_empty() {
        return Err("no command given".to_string());
    }
    let command = argv[0].clone();
    let mut flags = BTreeMap::new();
    let mut i = 1;
    while i < argv.len() {
        let key = argv[i]
            .strip_prefix("--")
            .ok_or_else(|| format!("expected --flag, found {:?}", argv[i]))?;
        let value = argv.get(i + 1).ok_or_else(|| format!("flag --{key} needs a value"))?;
        flags.insert(key.to_string(), value.clone());
        i += 2;
    }
    Ok((command, Args { flags }))
}

fn load_crystal(args: &Args) -> Result<FCrystal, String> {
    match args.get("preset") {
        Some(name) => {
            let p: u64 = args.parse("p")?.unwrap_or(2);
            let n = args.precision(3)?;
            let ring = GaloisRing::new(p, n, 1);
            match name {
                "ordinary-av" => {
                    let g: usize = args.parse("g")?.unwrap_or(1);
                    Ok(ordinary_av_h1(&ring, g))
                }
                "supersingular-exe" => {
                    let e = supersingular_e_h1(&ring);
                    direct_sum(&e, &e).map_err(|e| e.to_string())
                }
                "slope-module" => {
                    let r: usize = args.require("r")?;
                    let s: u32 = args.require("s")?;
                    standard_slope_module(&ring, r, s).map_err(|e| e.to_string())
                }
                other => Err(format!("unknown preset {other:?}")),
            }
        }
        None => {
            let mut input = String::new();
            std::io::stdin()
                .read_to_string(&mut input)
                .map_err(|e| format!("reading stdin: {e}"))?;
            let doc: CrystalDoc =
                serde_json::from_str(&input).map_err(|e| format!("parsing CrystalDoc: {e}"))?;
            doc.to_crystal().map_err(|e| e.to_string())
        }
    }
}

fn run(command: &str, args: &Args) -> Result<bool, String> {
    let started = Instant::now();
    let seed = args.seed()?;
    let passed = match command {
        "field" => {
            let p: u64 = args.require("p")?;
            let f: u32 = args.require("f")?;
            let fd = make_field(p, f).map_err(|e| e.to_string())?;
            let mut report = RunReport::new("field", json!({"p": p, "f": f}), seed);
            report.push(
                "minpoly",
                true,
                format!(
                    "t^{} + [{}]",
                    f,
                    fd.minpoly.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
                ),
            );
            report.print();
            true
        }
        "teich" => {
            let p: u64 = args.require("p")?;
            let n = args.precision(3)?;
            let a: String = args.require("a")?;
            let coords: Result<Vec<u64>, _> = a.split(',').map(|c| c.trim().parse()).collect();
            let coords = coords.map_err(|_| format!("--a: cannot parse {a:?}"))?;
            let f = coords.len() as u32;
            let ring = GaloisRing::new(p, n, f);
            let t = ring.teichmuller(&coords);
            let mut report =
                RunReport::new("teich", json!({"p": p, "N": n, "f": f, "a": a}), seed);
            report.push(
                "teichmuller",
                true,
                t.coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
            );
            report.print();
            true
        }
        "acris-exact" => {
            let p: u64 = args.require("p")?;
            let f: u32 = args.parse("f")?.unwrap_or(1);
            let vars: usize = args.parse("vars")?.unwrap_or(1);
            let depth: u32 = args.require("depth")?;
            let samples: usize = args.parse("samples")?.unwrap_or(100);
            let r = verify_syntomic_exactness(p, f, vars, depth, samples, seed);
            let mut report = RunReport::new(
                "acris-exact",
                json!({"p": p, "f": f, "vars": vars, "depth": depth, "samples": samples}),
                seed,
            );
            report.push(
                "left-injective",
                r.left_injective,
                format!("{} witnesses", r.left_witnesses),
            );
            report.push(
                "middle-exact",
                r.middle_exact,
                format!("{} witnesses", r.middle_witnesses),
            );
            report.push(
                "right-surjective",
                r.right_surjective,
                format!("{} witnesses", r.right_witnesses),
            );
            if let Some(ce) = &r.counterexample {
                report.push("counterexample", false, ce.clone());
            }
            report.print();
            r.all_pass()
        }
        "acris-log" => {
            let p: u64 = args.require("p")?;
            let n = args.precision(2)?;
            let coeff: u64 = args.require("coeff")?;
            let num: u64 = args.require("num")?;
            let den: u32 = args.parse("den")?.unwrap_or(0);
            let power: u64 = args.parse("power")?.unwrap_or(1);
            let ring = GaloisRing::new(p, n, 1);
            let exp = FracExp::new(p, num, den);
            let u = TateUnit::single(&ring, ring.scalar(coeff), vec![exp], power);
            let log = pd_log_unit(&ring, 1, &u, n).map_err(|e| e.to_string())?;
            let mut report = RunReport::new(
                "acris-log",
                json!({"p": p, "N": n, "coeff": coeff, "num": num, "den": den, "power": power}),
                seed,
            );
            report.push("nygaard", log.nygaard_test(), format!("{log:?}"));
            report.print();
            log.nygaard_test()
        }
        "acris-inf" => {
            let p: u64 = args.require("p")?;
            let n = args.precision(2)?;
            let depth: u32 = args.require("depth")?;
            let n_max: u32 = args.parse("nmax")?.unwrap_or(3);
            let max_int: u64 = args.parse("max-int")?.unwrap_or(p);
            let ring = GaloisRing::new(p, n, 1);
            let window = AcrisWindow::new(p, 1, max_int, depth);
            let (inter, ainf) =
                frobenius_intersection(&ring, &window, n_max).map_err(|e| e.to_string())?;
            let equal = inter == ainf;
            let mut report = RunReport::new(
                "acris-inf",
                json!({"p": p, "N": n, "depth": depth, "nmax": n_max, "max_int": max_int}),
                seed,
            );
            report.push(
                "intersection-equals-ainf",
                equal,
                format!("{} generators", ainf.num_generators()),
            );
            report.print();
            equal
        }
        "fcrystal-new" => {
            let x = load_crystal(args)?;
            let doc = CrystalDoc::from_crystal(&x);
            println!("{}", serde_json::to_string_pretty(&doc).expect("doc serializes"));
            true
        }
        "fcrystal-slopes" => {
            let x = load_crystal(args)?;
            let np = newton_polygon(&x).map_err(|e| e.to_string())?;
            let mut report = RunReport::new(
                "fcrystal-slopes",
                json!({"label": x.label, "rank": x.rank}),
                seed,
            );
            report.push(
                "newton-polygon",
                true,
                np.slopes
                    .iter()
                    .map(|s| format!("{}/{} x{}", s.num, s.den, s.multiplicity))
                    .collect::<Vec<_>>()
                    .join(", "),
            );
            report.print();
            true
        }
        "fcrystal-fppf" => {
            let levels: u32 = args.parse("levels")?.unwrap_or(3);
            let extra: u32 = args.parse("extra")?.unwrap_or(0);
            let h1 = load_crystal(args)?;
            let crystals = av_cohomology(&h1);
            let mut report = RunReport::new(
                "fcrystal-fppf",
                json!({"label": h1.label, "levels": levels, "extra": extra}),
                seed,
            );
            let mut all_data = Vec::new();
            for (i, x) in crystals.iter().enumerate() {
                let data = fppf_groups(x, levels, extra);
                report.push(
                    &format!("H^{i}"),
                    data.rank_stable && data.growth_exact,
                    format!(
                        "free rank {} | growth {}f'+{} | coker(top raw) {} | stabilized(level 0) {}",
                        data.free_rank,
                        data.growth_a,
                        data.growth_b,
                        data.levels
                            .last()
                            .map(|l| format!(
                                "exp{:?}+full^{}",
                                l.coker.torsion_exponents, l.coker.free_rank
                            ))
                            .unwrap_or_default(),
                        data.stabilized_torsion[0]
                            .as_ref()
                            .map(|c| format!("exp{:?}+full^{}", c.torsion_exponents, c.free_rank))
                            .unwrap_or_else(|| "needs more levels".to_string()),
                    ),
                );
                all_data.push(data);
            }
            // assembled fppf groups: free part of H^i from the degree-i
            // crystal, torsion from degree i-1
            for i in 0..=crystals.len() {
                let free = if i < all_data.len() { all_data[i].free_rank } else { 0 };
                let torsion = if i >= 1 && i - 1 < all_data.len() {
                    all_data[i - 1].stabilized_torsion[0]
                        .as_ref()
                        .map(|c| {
                            format!(
                                "{:?} (+{} growth)",
                                c.torsion_exponents,
                                all_data[i - 1].growth_a
                            )
                        })
                        .unwrap_or_else(|| "unstabilized".to_string())
                } else {
                    "[]".to_string()
                };
                report.push(
                    &format!("H^{i}_fl"),
                    true,
                    format!("free rank {free}, torsion {torsion}"),
                );
            }
            let ok = all_data.iter().all(|d| d.rank_stable && d.growth_exact);
            report.print();
            ok
        }
        "fcrystal-brauer" => {
            let ns_rank: usize = args.require("ns-rank")?;
            let (a, exp) =
                syntomic::battery::supersingular_brauer(ns_rank).map_err(|e| e.to_string())?;
            let mut report = RunReport::new(
                "fcrystal-brauer",
                json!({"preset": "supersingular-exe", "ns_rank": ns_rank}),
                seed,
            );
            report.push(
                "brauer-profile",
                true,
                format!("divisible corank a = {a}, finite exponent bound p^{exp}"),
            );
            report.print();
            true
        }
        "cech-h" => {
            let p: u64 = args.require("p")?;
            let degree: usize = args.require("degree")?;
            let x_deg: u64 = args.parse("x-deg")?.unwrap_or(p * p);
            let depth: u32 = args.parse("depth")?.unwrap_or(2);
            let window = CechWindow::new(p, 1, x_deg, depth);
            let r = h_modp(degree, &window).map_err(|e| e.to_string())?;
            let mut report = RunReport::new(
                "cech-h",
                json!({"p": p, "degree": degree, "x_deg": x_deg, "depth": depth}),
                seed,
            );
            report.push(
                &format!("H^{degree}-mod-p"),
                r.matches_oracle(),
                format!(
                    "dimension {} (de Rham oracle {}), interior cap {}",
                    r.dimension,
                    r.oracle_dimension,
                    window.interior_deg()
                ),
            );
            report.print();
            r.matches_oracle()
        }
        "selftest" => {
            let level = args.get("level").unwrap_or("quick");
            let ids: Vec<usize> = match level {
                "quick" => QUICK_IDS.to_vec(),
                "full" => ALL_IDS.to_vec(),
                other => return Err(format!("--level must be quick or full, got {other:?}")),
            };
            let results = run_battery(&ids, seed);
            let mut report = RunReport::new("selftest", json!({"level": level}), seed);
            for r in &results {
                report.push(
                    &format!("criterion-{:02}", r.id),
                    r.passed,
                    format!("{} - {}", r.name, r.details),
                );
                eprintln!("criterion {:>2}: {} ms", r.id, r.millis);
            }
            report.print();
            results.iter().all(|r| r.passed)
        }
        other => {
            return Err(format!("unknown command {other:?}"));
        }
    };
    eprintln!("elapsed: {:?}", started.elapsed());
    Ok(passed)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let (command, args) = match parse_args(&argv) {
        Ok(parsed) => parsed,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };
    match run(&command, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            ExitCode::from(2)
        }
    }
}
