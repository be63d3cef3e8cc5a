//! Shared test helpers: a seeded random program generator that only
//! emits valid, terminating programs (counter-bounded loops, acyclic
//! calls), plus corpus loading.

// Each integration-test binary uses a different subset of these.
#![allow(dead_code)]

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub struct Generated {
    pub source: String,
    pub inputs: Vec<i64>,
}

/// Emits a random valid program. Every loop is bounded by a constant
/// <= 3, helper calls go strictly downward, so every run terminates.
/// Functions stay under 12 blocks.
pub fn gen_program(seed: u64) -> Generated {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut src = String::new();

    let n_globals = rng.gen_range(1..=3);
    for g in 0..n_globals {
        let critical = if g == 0 { "critical " } else { "" };
        src.push_str(&format!("global {critical}@g{g} = {}\n", rng.gen_range(-5..20)));
    }
    let has_array = rng.gen_bool(0.7);
    if has_array {
        src.push_str("array @buf[4] = {1, 2, 3, 4}\n");
    }

    let n_helpers = rng.gen_range(0..=3usize);
    for h in 0..n_helpers {
        src.push_str(&format!("func h{h}(a) {{\nentry:\n"));
        match rng.gen_range(0..3) {
            0 => {
                src.push_str(&format!("  a = a + {}\n", rng.gen_range(1..5)));
                src.push_str("  ret a\n");
            }
            1 => {
                // Branch diamond.
                src.push_str(&format!("  br a < {}, low, high\nlow:\n", rng.gen_range(0..10)));
                src.push_str(&format!("  a = a + {}\n  jump join\nhigh:\n", rng.gen_range(1..4)));
                src.push_str(&format!("  a = a - {}\n  jump join\njoin:\n", rng.gen_range(1..4)));
                src.push_str("  ret a\n");
            }
            _ => {
                if h > 0 {
                    let callee = rng.gen_range(0..h);
                    src.push_str(&format!("  a = a * 2\n  call h{callee}(a) -> a then out\nout:\n  ret a\n"));
                } else {
                    src.push_str("  a = a * 2\n  ret a\n");
                }
            }
        }
        src.push_str("}\n");
    }

    src.push_str("func main() {\n  local x\n  local y\n  local i\n  local acc\n");
    if has_array {
        src.push_str("  local ptr p\n");
    }
    src.push_str("entry:\n  x = input\n  acc = 0\n  attest_begin 1\n");

    // Worst-case construct is 4 blocks; 2 constructs keep main under 12.
    let n_constructs = rng.gen_range(1..=2usize);
    let mut label = 0usize;
    for _ in 0..n_constructs {
        let mut fresh = || {
            label += 1;
            label
        };
        match rng.gen_range(0..4) {
            0 => {
                // Diamond.
                let (a, b, j) = (fresh(), fresh(), fresh());
                src.push_str(&format!(
                    "  br x < {}, b{a}, b{b}\nb{a}:\n  x = x + {}\n  jump b{j}\nb{b}:\n  x = x - {}\n  jump b{j}\nb{j}:\n",
                    rng.gen_range(-3..15),
                    rng.gen_range(1..6),
                    rng.gen_range(1..6),
                ));
            }
            1 => {
                // Bounded loop, optionally calling a helper in the body.
                let (head, body, exit) = (fresh(), fresh(), fresh());
                let bound = rng.gen_range(1..=3);
                src.push_str(&format!("  i = 0\n  jump b{head}\nb{head}:\n  br i < {bound}, b{body}, b{exit}\nb{body}:\n"));
                if n_helpers > 0 && rng.gen_bool(0.6) {
                    let callee = rng.gen_range(0..n_helpers);
                    let cont = fresh();
                    src.push_str(&format!("  call h{callee}(x) -> y then b{cont}\nb{cont}:\n  acc = acc + y\n"));
                } else {
                    src.push_str("  acc = acc + x\n");
                }
                src.push_str(&format!("  i = i + 1\n  jump b{head}\nb{exit}:\n"));
            }
            2 if n_helpers > 0 => {
                let callee = rng.gen_range(0..n_helpers);
                let cont = fresh();
                src.push_str(&format!("  call h{callee}(x) -> x then b{cont}\nb{cont}:\n"));
            }
            _ => {
                if has_array {
                    let idx = rng.gen_range(0..4);
                    src.push_str(&format!("  p = elem @buf, {idx}\n  store p, x\n  y = load p\n  acc = acc + y\n"));
                } else {
                    src.push_str(&format!("  y = x * {}\n  acc = acc + y\n", rng.gen_range(1..4)));
                }
            }
        }
    }
    src.push_str("  @g0 = acc\n  output acc\n  attest_end 1\n  halt\n}\n");

    Generated { source: src, inputs: vec![rng.gen_range(-10..30)] }
}

/// A straight-line program: `n_blocks` chained jump-only blocks between
/// the begin and end markers. Used for verifier-cost measurements.
pub fn gen_straightline(n_blocks: usize) -> String {
    let mut src = String::from("func main() {\nentry:\n  attest_begin 1\n  jump b0\n");
    for i in 0..n_blocks {
        src.push_str(&format!("b{i}:\n  jump b{}\n", i + 1));
    }
    src.push_str(&format!("b{n_blocks}:\n  attest_end 1\n  halt\n}}\n"));
    src
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

/// Corpus files with inputs that exercise their main loops.
pub fn corpus_runs() -> Vec<(String, String, Vec<i64>)> {
    let dir = corpus_dir();
    [
        ("syringe.mir", vec![7]),
        ("house_alarm.mir", vec![1, 4, 0, 2]),
        ("remote_move.mir", vec![1, 5]),
        ("rover.mir", vec![2]),
        ("light.mir", vec![0, 12]),
    ]
    .into_iter()
    .map(|(name, inputs)| {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path)
            .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
        (name.to_string(), text, inputs)
    })
    .collect()
}

/// Whether `needle` appears as a contiguous run inside `hay`.
pub fn is_window(needle: &[u64], hay: &[u64]) -> bool {
    if needle.is_empty() {
        return true;
    }
    if needle.len() > hay.len() {
        return false;
    }
    hay.windows(needle.len()).any(|w| w == needle)
}
