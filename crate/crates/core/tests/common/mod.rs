#![allow(dead_code)] // shared by multiple test binaries, each using a subset

//! Helpers shared by the integration tests: the frozen prox-fixture format
//! and small construction utilities.

use ndarray::Array2;

use hsunmix::datamodel::SpatialGrid;
use hsunmix::prox::Rho;

pub struct ProxFixture {
    pub id: usize,
    pub rho: Rho,
    pub m: usize,
    pub n_r: usize,
    pub n_c: usize,
    pub lambda: f64,
    pub lambda_tv: f64,
    pub sigma: f64,
    /// Evaluation point, row-major.
    pub v: Vec<f64>,
    /// Expected composed-prox output.
    pub expect_p: Vec<f64>,
    /// Expected within-column TV prox output at `sigma * lambda_tv`.
    pub expect_q: Vec<f64>,
}

impl ProxFixture {
    pub fn grid(&self) -> SpatialGrid {
        SpatialGrid::new(self.n_r, self.n_c).unwrap()
    }

    pub fn v_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.m, self.n_r * self.n_c), self.v.clone()).unwrap()
    }
}

fn rho_name(rho: Rho) -> &'static str {
    match rho {
        Rho::L1 => "l1",
        Rho::L21 => "l21",
    }
}

fn parse_rho(s: &str) -> Rho {
    match s {
        "l1" => Rho::L1,
        "l21" => Rho::L21,
        other => panic!("bad rho `{other}` in fixture file"),
    }
}

fn fmt_values(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:.17e}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn parse_values(s: &str) -> Vec<f64> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().expect("numeric fixture value"))
        .collect()
}

pub fn format_fixtures(fixtures: &[ProxFixture]) -> String {
    let mut out = String::new();
    out.push_str("# frozen prox oracle fixtures; regenerate with:\n");
    out.push_str("#   cargo test --test fixture_gen -- --ignored --nocapture\n");
    for f in fixtures {
        out.push_str(&format!("instance {}\n", f.id));
        out.push_str(&format!("rho {}\n", rho_name(f.rho)));
        out.push_str(&format!("m {} nr {} nc {}\n", f.m, f.n_r, f.n_c));
        out.push_str(&format!(
            "weights {:.17e} {:.17e} {:.17e}\n",
            f.lambda, f.lambda_tv, f.sigma
        ));
        out.push_str(&format!("v {}\n", fmt_values(&f.v)));
        out.push_str(&format!("p {}\n", fmt_values(&f.expect_p)));
        out.push_str(&format!("q {}\n", fmt_values(&f.expect_q)));
        out.push_str("end\n");
    }
    out
}

pub fn parse_fixtures(text: &str) -> Vec<ProxFixture> {
    let mut fixtures = Vec::new();
    let mut cur: Option<ProxFixture> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (tag, rest) = line.split_once(' ').unwrap_or((line, ""));
        match tag {
            "instance" => {
                cur = Some(ProxFixture {
                    id: rest.parse().expect("instance id"),
                    rho: Rho::L1,
                    m: 0,
                    n_r: 0,
                    n_c: 0,
                    lambda: 0.0,
                    lambda_tv: 0.0,
                    sigma: 1.0,
                    v: Vec::new(),
                    expect_p: Vec::new(),
                    expect_q: Vec::new(),
                });
            }
            "rho" => cur.as_mut().unwrap().rho = parse_rho(rest),
            "m" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let f = cur.as_mut().unwrap();
                f.m = parts[0].parse().unwrap();
                assert_eq!(parts[1], "nr");
                f.n_r = parts[2].parse().unwrap();
                assert_eq!(parts[3], "nc");
                f.n_c = parts[4].parse().unwrap();
            }
            "weights" => {
                let vals = parse_values(rest);
                let f = cur.as_mut().unwrap();
                f.lambda = vals[0];
                f.lambda_tv = vals[1];
                f.sigma = vals[2];
            }
            "v" => cur.as_mut().unwrap().v = parse_values(rest),
            "p" => cur.as_mut().unwrap().expect_p = parse_values(rest),
            "q" => cur.as_mut().unwrap().expect_q = parse_values(rest),
            "end" => fixtures.push(cur.take().expect("instance block open")),
            other => panic!("unknown fixture tag `{other}`"),
        }
    }
    fixtures
}

pub fn fixtures_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join("prox_fixtures.txt")
}
