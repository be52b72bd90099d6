//! The reproducible self-test battery: every check the tool promises is
//! implemented here as a criterion returning a pass/fail line with measured
//! values. The CLI selftest and the acceptance suite both run these.

use std::fmt::Write as _;
use std::time::Instant;

use crate::acris::{
    frobenius_intersection, AcrisWindow, FracExp, PdSeries,
};
use crate::arith::Rng;
use crate::cech::{h_modp, CechWindow};
use crate::fcrystal::{
    av_cohomology, brauer_profile, cokernel_divisors_of_f_minus_p, coker_f_minus_p_witness,
    direct_sum, fppf_groups, isogeny_action_check, newton_polygon, ordinary_av_h1,
    standard_slope_module, supersingular_e_h1, wedge_power, FCrystal,
};
use crate::padic::GaloisRing;
use crate::syntomic::{etale_sequence_check, verify_syntomic_exactness};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub details: String,
    pub millis: u128,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} [{}] {} - {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.details
        )
    }
}

/// Criteria that finish quickly; the quick selftest runs exactly these.
pub const QUICK_IDS: [usize; 9] = [1, 2, 3, 6, 7, 8, 9, 10, 11];

pub const ALL_IDS: [usize; 12] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12];

pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let t0 = Instant::now();
    let (name, passed, details) = match id {
        1 => teichmuller_criterion(seed),
        2 => syntomic_exactness_criterion(seed),
        3 => nygaard_equivalence_criterion(seed, &honest_gamma),
        4 => ordinary_av_criterion(),
        5 => supersingular_criterion(),
        6 => slope_cokernel_criterion(seed),
        7 => newton_polygon_criterion(),
        8 => infinitesimal_comparison_criterion(),
        9 => etale_sequence_criterion(seed),
        10 => cech_descent_criterion(),
        11 => isogeny_action_criterion(),
        12 => determinism_and_fault_criterion(seed),
        _ => ("unknown", false, format!("no criterion with id {id}")),
    };
    CriterionResult { id, name, passed, details, millis: t0.elapsed().as_millis() }
}

pub fn run_battery(ids: &[usize], seed: u64) -> Vec<CriterionResult> {
    ids.iter().map(|&id| run_criterion(id, seed)).collect()
}

fn honest_gamma(x: &FracExp) -> u64 {
    x.gamma()
}

// --- criterion 1: Teichmüller ---

fn teichmuller_criterion(seed: u64) -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    let g53 = GaloisRing::new(5, 3, 1);
    let t = g53.teichmuller(&[2]);
    ok &= t.coeffs == vec![57];
    let _ = write!(details, "teich(5,1,3)(2)={} ", t.coeffs[0]);
    let g32 = GaloisRing::new(3, 2, 1);
    let t = g32.teichmuller(&[2]);
    ok &= t.coeffs == vec![8];
    let _ = write!(details, "teich(3,1,2)(2)={} ", t.coeffs[0]);
    let mut rng = Rng::new(seed ^ 0x7e1c);
    let mut pairs = 0;
    for &(p, f) in &[(2u64, 2u32), (3, 2), (5, 1)] {
        let gr = GaloisRing::new(p, 3, f);
        let gr1 = gr.at_precision(1);
        for _ in 0..100 {
            let a: Vec<u64> = (0..f as usize).map(|_| rng.below(p)).collect();
            let b: Vec<u64> = (0..f as usize).map(|_| rng.below(p)).collect();
            let ta = gr.teichmuller(&a);
            let tb = gr.teichmuller(&b);
            let ab = gr1.mul(
                &crate::padic::GrElem { coeffs: a.clone() },
                &crate::padic::GrElem { coeffs: b.clone() },
            );
            if gr.teichmuller(&ab.coeffs) != gr.mul(&ta, &tb) {
                ok = false;
            }
            // root-of-unity oracle
            if a.iter().any(|&c| c != 0) {
                let mut power = ta.clone();
                // ta^(p^f - 1) via p^f-th power equals ta itself
                for _ in 0..f {
                    power = gr.pow(&power, p);
                }
                if power != ta {
                    ok = false;
                }
            }
            pairs += 1;
        }
    }
    let _ = write!(details, "multiplicative on {pairs} pairs");
    ("teichmuller lifts", ok, details)
}

// --- criterion 2: syntomic exactness ---

fn syntomic_exactness_criterion(seed: u64) -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &(p, f, n, depth) in &[(2u64, 1u32, 1usize, 3u32), (3, 1, 1, 3), (2, 2, 1, 2), (5, 1, 1, 2), (2, 1, 2, 2)] {
        let report = verify_syntomic_exactness(p, f, n, depth, 100, seed ^ 0x5e9);
        let pass = report.all_pass();
        ok &= pass;
        let _ = write!(
            details,
            "({p},{f},{n},{depth}):{} ",
            if pass {
                format!("ok[{}l/{}m/{}r]", report.left_witnesses, report.middle_witnesses, report.right_witnesses)
            } else {
                format!("FAIL[{}]", report.counterexample.unwrap_or_default())
            }
        );
    }
    ("syntomic exactness mod p", ok, details)
}

// --- criterion 3: Nygaard criterion equivalence ---

/// Compare the coefficient test with the Frobenius-divisibility test over
/// the full monomial window of the given depth plus random sums; the gamma
/// valuation is injectable so that a corrupted build is caught here.
pub fn nygaard_equivalence_check(
    p: u64,
    depth: u32,
    samples: usize,
    seed: u64,
    gamma: &dyn Fn(&FracExp) -> u64,
) -> (usize, usize) {
    let base = GaloisRing::new(p, 2, 1);
    let window = AcrisWindow::new(p, 1, p, depth);
    let mut checked = 0;
    let mut disagreements = 0;
    let mut verify = |a: &PdSeries<GaloisRing>| {
        let coeff_test = a.nygaard_test();
        let frob_test = a.frobenius_with_gamma(gamma).val() >= 1;
        checked += 1;
        if coeff_test != frob_test {
            disagreements += 1;
        }
    };
    for e in window.monomials() {
        for c in 1..p.pow(2) {
            let m = PdSeries::basis_term(&base, 1, e.clone(), base.scalar(c));
            verify(&m);
        }
    }
    let mut rng = Rng::new(seed ^ 0x3a7);
    for _ in 0..samples {
        let a = PdSeries::random_in_window(&base, 1, &mut rng, p, depth, 3);
        verify(&a);
    }
    (checked, disagreements)
}

fn nygaard_equivalence_criterion(
    seed: u64,
    gamma: &dyn Fn(&FracExp) -> u64,
) -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &p in &[2u64, 3] {
        let (checked, disagreements) = nygaard_equivalence_check(p, 3, 500, seed, gamma);
        ok &= disagreements == 0;
        let _ = write!(details, "p={p}:{checked} checked, {disagreements} disagree ");
    }
    ("nygaard criterion equivalence", ok, details)
}

// --- criterion 4: ordinary abelian varieties ---

fn binom(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let mut r = 1usize;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

fn ordinary_av_criterion() -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &p in &[2u64, 5] {
        for g in 1..=3usize {
            let ring = GaloisRing::new(p, 3, 1);
            let h1 = ordinary_av_h1(&ring, g);
            let crystals = av_cohomology(&h1);
            for (i, x) in crystals.iter().enumerate() {
                let data = fppf_groups(x, 3, 0);
                let expect_rank = if i == 0 { 0 } else { g * binom(g, i - 1) };
                if data.free_rank != expect_rank || !data.rank_stable {
                    ok = false;
                    let _ = write!(details, "p={p} g={g} H^{i}: rank {} != {} ", data.free_rank, expect_rank);
                }
                if data.growth_a != 0 || !data.growth_exact {
                    ok = false;
                    let _ = write!(details, "p={p} g={g} H^{i}: growth a={} ", data.growth_a);
                }
                match data.stabilized_torsion[0].as_ref() {
                    Some(st) if st.is_trivial() => {}
                    other => {
                        ok = false;
                        let _ = write!(details, "p={p} g={g} H^{i}: torsion {other:?} ");
                    }
                }
            }
        }
    }
    if ok {
        details = "ranks g*binom(g,i-1), torsion trivial, growth 0 for g in 1..3, p in {2,5}".into();
    }
    ("ordinary abelian varieties", ok, details)
}

// --- criterion 5: supersingular E x E ---

fn supersingular_criterion() -> (&'static str, bool, String) {
    let p = 2u64;
    let n = 3u32;
    let ring = GaloisRing::new(p, n, 1);
    let e = supersingular_e_h1(&ring);
    let a = direct_sum(&e, &e).expect("same base");
    let h2 = wedge_power(&a, 2);
    let mut ok = true;
    let mut details = String::new();
    // degree-3 torsion = cokernel over the H^2 crystal, tower j <= 3 with
    // three internal levels so every reported level is fully stabilized
    let d2 = fppf_groups(&h2, 3, n);
    if d2.growth_a != 1 || !d2.growth_exact {
        ok = false;
        let _ = write!(details, "growth a={} ", d2.growth_a);
    }
    for (j, st) in d2.stabilized_torsion.iter().enumerate() {
        let f_level = (p as usize).pow(j as u32);
        match st {
            Some(c) if c.free_rank == 0 && c.torsion_exponents == vec![1u32; f_level] => {}
            other => {
                ok = false;
                let _ = write!(details, "level {j}: stabilized {other:?} ");
            }
        }
    }
    // H^2_fl free rank: the tower derivation gives 6 (= NS rank of the
    // product, consistent with slope-1 purity); a value of 2 sometimes
    // quoted for this group is inconsistent with the Kunneth blocks
    if d2.free_rank != 6 || !d2.rank_stable {
        ok = false;
        let _ = write!(details, "H2 rank {} != 6 ", d2.free_rank);
    }
    // H^1_fl = 0: free part from the H^1 crystal, torsion from H^0
    let h1 = wedge_power(&a, 1);
    let d1 = fppf_groups(&h1, 1, n);
    if d1.free_rank != 0 {
        ok = false;
        let _ = write!(details, "H1 rank {} != 0 ", d1.free_rank);
    }
    let h0 = wedge_power(&a, 0);
    let d0 = fppf_groups(&h0, 1, n);
    match d0.stabilized_torsion[0].as_ref() {
        Some(st) if st.is_trivial() => {}
        other => {
            ok = false;
            let _ = write!(details, "H1 torsion {other:?} ");
        }
    }
    if ok {
        details = "U_3 = G_a (a=1, coker = k' per level, exponent p), \
                   H2 rank 6 = NS rank (quoted value 2 flagged), H1 = 0"
            .into();
    }
    ("supersingular E x E", ok, details)
}

// --- criterion 6: slope-module cokernels ---

fn slope_cokernel_criterion(seed: u64) -> (&'static str, bool, String) {
    let p = 2u64;
    let n = 4u32;
    let ring = GaloisRing::new(p, n, 1);
    let mut ok = true;
    let mut details = String::new();
    let mut rng = Rng::new(seed ^ 0xc0e);
    // constructive preimages: M_{2/1} (series through F^i/p^i), M_{0/1}
    // (series through F^{-i} p^{i-1})
    for &(r, s, scale) in &[(1usize, 2u32, 1u32), (1, 0, 0)] {
        let x = standard_slope_module(&ring, r, s).expect("coprime");
        let mut verified = 0;
        for _ in 0..20 {
            let target: Vec<_> = (0..r)
                .map(|_| {
                    let mut e = ring.random(&mut rng);
                    for _ in 0..scale {
                        e = ring.mul_pow_p(&e, 1);
                    }
                    e
                })
                .collect();
            match coker_f_minus_p_witness(&ring, r, s, &target) {
                Ok(w) => {
                    let fx = x.apply_f(&w);
                    let lhs: Vec<_> = fx
                        .iter()
                        .zip(&w)
                        .map(|(a, b)| ring.sub(a, &ring.mul_pow_p(b, 1)))
                        .collect();
                    if lhs == target {
                        verified += 1;
                    } else {
                        ok = false;
                    }
                }
                Err(e) => {
                    ok = false;
                    let _ = write!(details, "M_{s}/{r} witness error {e} ");
                }
            }
        }
        let _ = write!(details, "M_{s}/{r}:{verified}/20 ");
    }
    // uniform exponent bound across tower levels
    for &(r, s) in &[(1usize, 0u32), (1, 1), (1, 2), (2, 1), (3, 1), (3, 2)] {
        let mut exps = Vec::new();
        for j in 0..=3u32 {
            let level_ring = GaloisRing::new(p, n, p.pow(j) as u32);
            let x = standard_slope_module(&level_ring, r, s).expect("coprime");
            let coker = cokernel_divisors_of_f_minus_p(&x);
            exps.push(coker.max_exponent());
        }
        let stable = exps.windows(2).skip(1).all(|w| w[0] == w[1]);
        if !stable {
            ok = false;
            let _ = write!(details, "M_{s}/{r} exponents {exps:?} unstable ");
        } else {
            let _ = write!(details, "M_{s}/{r}:exp {} ", exps.last().unwrap());
        }
    }
    ("slope-module cokernels", ok, details)
}

// --- criterion 7: Newton polygons ---

fn newton_polygon_criterion() -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    let ring = GaloisRing::new(2, 4, 1);
    for &(r, s) in &[(1usize, 0u32), (1, 1), (1, 2), (2, 1), (3, 1), (3, 2)] {
        let x = standard_slope_module(&ring, r, s).expect("coprime");
        match newton_polygon(&x) {
            Ok(np) => {
                let pass = np.slopes.len() == 1
                    && np.slopes[0].value_eq(s as u64, r as u64)
                    && np.slopes[0].multiplicity == r;
                ok &= pass;
                if !pass {
                    let _ = write!(details, "M_{s}/{r}: {:?} ", np.slopes);
                }
            }
            Err(e) => {
                ok = false;
                let _ = write!(details, "M_{s}/{r}: {e} ");
            }
        }
    }
    let np = newton_polygon(&ordinary_av_h1(&ring, 1)).expect("newton");
    ok &= np.slopes.len() == 2 && np.slopes[0].value_eq(0, 1) && np.slopes[1].value_eq(1, 1);
    let np = newton_polygon(&supersingular_e_h1(&ring)).expect("newton");
    ok &= np.slopes.len() == 1 && np.slopes[0].value_eq(1, 2) && np.slopes[0].multiplicity == 2;
    if ok {
        details = "six slope modules, ordinary {0,1}, supersingular {1/2,1/2}".into();
    }
    ("newton polygons", ok, details)
}

// --- criterion 8: infinitesimal comparison ---

fn infinitesimal_comparison_criterion() -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &p in &[2u64, 3] {
        let ring = GaloisRing::new(p, 2, 1);
        let window = AcrisWindow::new(p, 1, p, 3);
        match frobenius_intersection(&ring, &window, 3) {
            Ok((inter, ainf)) => {
                let pass = inter == ainf;
                ok &= pass;
                let _ = write!(details, "p={p}:{} ", if pass { "equal" } else { "DIFFER" });
            }
            Err(e) => {
                ok = false;
                let _ = write!(details, "p={p}: {e} ");
            }
        }
    }
    ("infinitesimal comparison (Ainf as Frobenius intersection)", ok, details)
}

// --- criterion 9: etale-variant sequence ---

fn etale_sequence_criterion(seed: u64) -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &(p, f) in &[(2u64, 1u32), (3, 1), (2, 2)] {
        let window = AcrisWindow::new(p, 1, p * p, 2);
        match etale_sequence_check(p, f, &window, 20, seed ^ 0xe7a) {
            Ok(report) => {
                ok &= report.all_pass();
                let _ = write!(
                    details,
                    "(p={p},f={f}): kernel {} preimages {}/{} ",
                    if report.kernel_is_scalars { "F_p" } else { "WRONG" },
                    report.preimage_checks,
                    report.preimage_checks + report.failures
                );
            }
            Err(e) => {
                ok = false;
                let _ = write!(details, "(p={p},f={f}): {e} ");
            }
        }
    }
    ("etale-variant sequence", ok, details)
}

// --- criterion 10: Cech descent ---

fn cech_descent_criterion() -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &p in &[2u64, 3] {
        let window = CechWindow::new(p, 1, p * p, 2);
        match (h_modp(0, &window), h_modp(1, &window)) {
            (Ok(r0), Ok(r1)) => {
                let pass = r0.matches_oracle() && r1.matches_oracle();
                ok &= pass;
                let _ = write!(
                    details,
                    "p={p}: H0 {}(oracle {}) H1 {}(oracle {}) ",
                    r0.dimension, r0.oracle_dimension, r1.dimension, r1.oracle_dimension
                );
            }
            (e0, e1) => {
                ok = false;
                let _ = write!(details, "p={p}: {:?}/{:?} ", e0.err(), e1.err());
            }
        }
    }
    ("cech descent for the affine line", ok, details)
}

// --- criterion 11: isogeny action ---

fn isogeny_action_criterion() -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    for &p in &[2u64, 5] {
        let ring = GaloisRing::new(p, 2, 1);
        let mut presets: Vec<(String, Vec<FCrystal>)> = Vec::new();
        presets.push(("ordinary g=1".into(), av_cohomology(&ordinary_av_h1(&ring, 1))));
        let e = supersingular_e_h1(&ring);
        let a = direct_sum(&e, &e).expect("base");
        presets.push(("supersingular ExE".into(), av_cohomology(&a)));
        for (label, crystals) in presets {
            for n_mult in [2u64, 3, p] {
                for (i, x) in crystals.iter().enumerate() {
                    let rep = isogeny_action_check(x, n_mult, i as u32);
                    if !rep.all_pass() {
                        ok = false;
                        let _ = write!(details, "{label} n={n_mult} H^{i}: {rep:?} ");
                    }
                }
            }
        }
    }
    if ok {
        details = "scalar n^i action verified on ordinary and supersingular presets, n in {2,3,p}".into();
    }
    ("isogeny action", ok, details)
}

// --- criterion 12: determinism and fault detection ---

fn determinism_and_fault_criterion(seed: u64) -> (&'static str, bool, String) {
    let mut ok = true;
    let mut details = String::new();
    // determinism: the quick battery twice, byte-identical lines
    let quick: Vec<usize> = QUICK_IDS.to_vec();
    let lines1: Vec<String> = run_battery(&quick, seed).iter().map(|r| r.line()).collect();
    let lines2: Vec<String> = run_battery(&quick, seed).iter().map(|r| r.line()).collect();
    if lines1 != lines2 {
        ok = false;
        let _ = write!(details, "quick battery reports differ between runs ");
    } else {
        let _ = write!(details, "quick battery deterministic ({} lines) ", lines1.len());
    }
    // fault detection: a corrupted gamma valuation must break criterion 3
    let corrupted = |x: &FracExp| -> u64 {
        let v = x.gamma();
        if x.floor() >= x.p {
            v.saturating_sub(1)
        } else {
            v
        }
    };
    let (_, disagreements) = nygaard_equivalence_check(2, 3, 100, seed, &corrupted);
    if disagreements == 0 {
        ok = false;
        let _ = write!(details, "corrupted gamma not detected ");
    } else {
        let _ = write!(details, "corrupted gamma detected ({disagreements} disagreements)");
    }
    ("determinism and fault detection", ok, details)
}

// --- convenience entry points for the Brauer profile over presets ---

/// Supersingular E x E Brauer data: derived H^2 rank and degree-3 torsion
/// exponent against a caller-supplied Neron-Severi rank.
pub fn supersingular_brauer(ns_rank: usize) -> Result<(usize, u32), crate::fcrystal::CrystalError> {
    let ring = GaloisRing::new(2, 3, 1);
    let e = supersingular_e_h1(&ring);
    let a = direct_sum(&e, &e)?;
    let h2 = wedge_power(&a, 2);
    let d2 = fppf_groups(&h2, 2, 3);
    let torsion_exp = d2
        .stabilized_torsion
        .iter()
        .flatten()
        .map(|c| c.max_exponent())
        .max()
        .unwrap_or(0);
    brauer_profile(d2.free_rank, torsion_exp, ns_rank)
}
