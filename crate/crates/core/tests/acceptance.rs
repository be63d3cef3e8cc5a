//! Acceptance suite: one test per release criterion. Each test prints a
//! single `criterion N (...): pass/fail` line so the suite doubles as a
//! checklist when run with `--nocapture`.

mod common;

use common::{corpus_runs, gen_program, gen_straightline, is_window};
use opattest_core::analysis::{analyze, count_address_based_sites, Analysis};
use opattest_core::instrument::{instrument, Instrumented};
use opattest_core::measure::{
    hash_update, keys, BitTrace, Blob, BlobFile, Nonce, ReturnHash, Traces, INITIAL_HASH,
};
use opattest_core::mini_ir::{parse_program, Program, TermOp};
use opattest_core::prover::{
    run_benign_pair, FaultAction, FaultSpec, Machine, RunConfig, RunOutput,
};
use opattest_core::scenario::Scenario;
use opattest_core::verifier::{
    abstract_exec, enumerate_legal_proofs, verify, FailureClass, Span, TraceCursor,
    VerificationReport,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::{HashMap, HashSet};
use std::time::Instant;

/// Runs the criterion body and prints its pass/fail line even when the
/// body panics (the panic is re-raised so the test still fails).
fn criterion(n: u32, label: &str, body: impl FnOnce() + std::panic::UnwindSafe) {
    match std::panic::catch_unwind(body) {
        Ok(()) => println!("criterion {n} ({label}): pass"),
        Err(e) => {
            println!("criterion {n} ({label}): fail");
            std::panic::resume_unwind(e);
        }
    }
}

struct Built {
    program: Program,
    analysis: Analysis,
    inst: Instrumented,
}

fn build(source: &str) -> Built {
    let program = parse_program(source).unwrap_or_else(|d| panic!("parse: {d:?}"));
    let analysis = analyze(&program, source).unwrap_or_else(|d| panic!("analyze: {d:?}"));
    let inst = instrument(&program, &analysis.sites).expect("instrument");
    Built { program, analysis, inst }
}

fn nonce_from(rng: &mut impl Rng) -> Nonce {
    let mut n = Nonce::default();
    rng.fill_bytes(&mut n);
    n
}

fn attest(
    b: &Built,
    inputs: &[i64],
    faults: Vec<FaultSpec>,
    irqs: Vec<opattest_core::prover::InterruptSpec>,
    key: &ed25519_dalek::SigningKey,
    nonce: Nonce,
    step_limit: u64,
) -> RunOutput {
    let mut cfg = RunConfig::new(key.clone(), nonce);
    cfg.step_limit = step_limit;
    Machine::new(&b.program, &b.inst, inputs.to_vec(), faults, irqs, cfg).run()
}

fn verify_op(
    b: &Built,
    run: &RunOutput,
    op_id: u32,
    key: &ed25519_dalek::SigningKey,
    nonce: &Nonce,
) -> VerificationReport {
    let file = run
        .attestations
        .get(&op_id)
        .unwrap_or_else(|| panic!("no attestation for operation {op_id}"));
    verify(&b.analysis.bundle, &key.verifying_key(), nonce, file)
}

/// Code address of a function's first `ret` terminator.
fn ret_addr(program: &Program, func: &str) -> u64 {
    let fi = program.function_named(func).unwrap_or_else(|| panic!("no function {func}"));
    program.functions[fi as usize]
        .blocks
        .iter()
        .find(|b| matches!(b.term.op, TermOp::Return { .. }))
        .unwrap_or_else(|| panic!("{func} has no ret"))
        .term
        .addr
}

fn entry_addr(program: &Program, func: &str) -> u64 {
    let fi = program.function_named(func).unwrap_or_else(|| panic!("no function {func}"));
    program.functions[fi as usize].entry_addr()
}

// --- 1. Benign round trip -------------------------------------------------

#[test]
fn criterion_1_benign_round_trip() {
    criterion(1, "benign round trip", || {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let key = keys::generate(Some([1u8; 32]));

        let mut cases: Vec<(String, String, Vec<i64>)> = corpus_runs();
        for seed in 0..200u64 {
            let g = gen_program(seed);
            cases.push((format!("gen-{seed}"), g.source, g.inputs));
        }
        assert!(cases.len() >= 205);

        for (name, source, inputs) in &cases {
            let b = build(source);
            let nonce = nonce_from(&mut rng);
            let run = attest(&b, inputs, vec![], vec![], &key, nonce, 5_000_000);
            assert!(run.error.is_none(), "{name}: runtime error {:?}", run.error);
            for (&op_id, _) in &run.attestations {
                let report = verify_op(&b, &run, op_id, &key, &nonce);
                assert!(report.pass, "{name} op {op_id}: {:?}", report.failures);
                assert!(
                    is_window(&report.path, &run.path),
                    "{name} op {op_id}: reconstructed path is not the executed path"
                );
                assert!(!report.path.is_empty(), "{name}: empty reconstructed path");
            }
        }
        assert!(start.elapsed().as_secs() < 60, "round trip exceeded 60s");
    });
}

// --- 2. Attack detection ---------------------------------------------------

#[test]
fn criterion_2_attack_scenarios_detected() {
    criterion(2, "bundled attack scenarios detected", || {
        let dir = common::corpus_dir().join("scenarios");
        let map = [
            ("remote_move_fnptr_overwrite.json", "remote_move.mir"),
            ("remote_move_unintended_op.json", "remote_move.mir"),
            ("syringe_return_overwrite.json", "syringe.mir"),
            ("house_alarm_critical_var.json", "house_alarm.mir"),
            ("rover_interrupted_benign.json", "rover.mir"),
        ];
        let key = keys::generate(Some([2u8; 32]));
        let mut rng = ChaCha8Rng::seed_from_u64(22);

        for (scenario_file, program_file) in map {
            let sc_text = std::fs::read_to_string(dir.join(scenario_file))
                .unwrap_or_else(|e| panic!("{scenario_file}: {e}"));
            let sc = Scenario::from_json(&sc_text).expect(scenario_file);
            let source =
                std::fs::read_to_string(common::corpus_dir().join(program_file)).unwrap();
            let b = build(&source);
            let (faults, irqs) = sc.resolve(&b.program).expect(scenario_file);

            // Benign reference run for path comparison.
            let nonce = nonce_from(&mut rng);
            let benign = attest(&b, &sc.inputs, vec![], vec![], &key, nonce, 5_000_000);

            let nonce2 = nonce_from(&mut rng);
            let run = attest(&b, &sc.inputs, faults, irqs, &key, nonce2, 5_000_000);
            let report = verify_op(&b, &run, sc.op_id, &key, &nonce2);
            let diverged = !is_window(&report.path, &benign.path);
            assert!(
                sc.matches(&report, diverged),
                "{scenario_file}: expectation {:?} not met; pass={} diverged={diverged} failures={:?}",
                sc.expect,
                report.pass,
                report.failures
            );
        }
    });
}

// --- 3. Return-corruption always breaks the hash ----------------------------

#[test]
fn criterion_3_return_corruption_always_detected() {
    criterion(3, "return corruption always detected", || {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let key = keys::generate(Some([3u8; 32]));

        // (file, inputs, callees that return inside the operation,
        //  redirect targets, max occurrence safely executed).
        let plans: &[(&str, &[i64], &[&str], &[&str], u32)] = &[
            ("syringe.mir", &[7], &["record", "step_motor"], &["record", "step_motor"], 3),
            (
                "house_alarm.mir",
                &[1, 4, 0, 2],
                &["read_sensor", "show", "siren"],
                &["read_sensor", "show", "siren"],
                1,
            ),
            ("remote_move.mir", &[1, 5], &["move_back"], &["move_fwd", "move_back", "report", "home"], 1),
            ("rover.mir", &[2], &["drive"], &["drive", "tick"], 2),
            (
                "light.mir",
                &[1, 6],
                &[
                    "c1", "c2", "c3", "c4", "c5", "c6", "c7", "c8", "c9", "c10", "c11", "c12",
                    "c13", "c14", "c15", "c16",
                ],
                &["c1", "c3", "c6", "c9", "c12", "c16"],
                3,
            ),
        ];

        let mut runs = 0usize;
        for (file, inputs, callees, targets, max_occ) in plans {
            let source = std::fs::read_to_string(common::corpus_dir().join(file)).unwrap();
            let b = build(&source);
            for callee in *callees {
                let site = ret_addr(&b.program, callee);
                for target in *targets {
                    let value = entry_addr(&b.program, target);
                    let occurrence = rng.gen_range(1..=*max_occ);
                    let fault = FaultSpec {
                        addr: site,
                        occurrence,
                        action: FaultAction::OverwriteReturn { value },
                    };
                    let nonce = nonce_from(&mut rng);
                    let run = attest(&b, inputs, vec![fault], vec![], &key, nonce, 200_000);
                    let report = verify_op(&b, &run, 1, &key, &nonce);
                    assert!(
                        !report.pass,
                        "{file}: {callee} ret redirected to {target} (occ {occurrence}) passed"
                    );
                    assert!(
                        report.has(FailureClass::Structure)
                            || report.has(FailureClass::HashMismatch),
                        "{file}: {callee}->{target}: wrong class {:?}",
                        report.failures
                    );
                    runs += 1;
                }
            }
        }
        assert!(runs >= 100, "only {runs} corruption runs");
    });
}

// --- 4. Evidence size ---------------------------------------------------------

#[test]
fn criterion_4_evidence_size() {
    criterion(4, "hashed evidence compact and depth-invariant", || {
        let key = keys::generate(Some([4u8; 32]));
        let source = std::fs::read_to_string(common::corpus_dir().join("light.mir")).unwrap();
        let b = build(&source);

        // Loop- and call-heavy run: deep mode, 64 iterations.
        let pair = run_benign_pair(&b.program, &b.inst, vec![1, 64], &key, [9u8; 16]);
        assert!(pair.hashed.error.is_none() && pair.plain.error.is_none());
        assert!(
            pair.hashed_bytes * 10 <= pair.plain_bytes,
            "hashed {} bytes vs baseline {} bytes",
            pair.hashed_bytes,
            pair.plain_bytes
        );

        // Same branch structure, depth-8 vs depth-16 call chain: the
        // trace payload must not grow when the return count doubles.
        let shallow = run_benign_pair(&b.program, &b.inst, vec![0, 32], &key, [9u8; 16]);
        let deep = run_benign_pair(&b.program, &b.inst, vec![1, 32], &key, [9u8; 16]);
        assert_eq!(
            deep.hashed_return_events,
            2 * shallow.hashed_return_events,
            "expected the deep mode to double the return count"
        );
        assert_eq!(
            shallow.hashed_bytes, deep.hashed_bytes,
            "hashed trace size changed with call depth"
        );
        assert_eq!(std::mem::size_of::<ReturnHash>(), 32);
    });
}

// --- 5. Instrumentation reduction ---------------------------------------------

#[test]
fn criterion_5_instrumentation_reduction() {
    criterion(5, "criticality-based site reduction", || {
        let mut fewest: Option<(String, usize, f64)> = None;
        for (name, source, _) in corpus_runs() {
            let b = build(&source);
            let data = b.analysis.sites.data.len();
            let baseline = count_address_based_sites(&b.program);
            assert!(
                data < baseline,
                "{name}: {data} value-check sites not below {baseline} address-based sites"
            );
            let crit = b.analysis.critical.members.len();
            let ratio = data as f64 / baseline as f64;
            if fewest.as_ref().map_or(true, |(_, c, _)| crit < *c) {
                fewest = Some((name, crit, ratio));
            }
        }
        let (name, crit, ratio) = fewest.unwrap();
        assert!(
            ratio <= 0.40,
            "{name} (fewest critical vars: {crit}) has site ratio {ratio:.3} > 0.40"
        );
    });
}

// --- 6. Collision / ambiguity ---------------------------------------------------

#[test]
fn criterion_6_no_collisions_or_ambiguity() {
    criterion(6, "hash collisions and proof ambiguity absent", || {
        let start = Instant::now();

        // Every return sequence of length <= 4 over a 16-address alphabet
        // must hash to a distinct chain value (including the empty one).
        let alphabet: Vec<u64> = (0..16).map(|i| 0x1000 + 4 * i).collect();
        let mut seen: HashSet<ReturnHash> = HashSet::new();
        seen.insert(INITIAL_HASH);
        let mut stack = vec![(INITIAL_HASH, 0usize)];
        let mut count = 1usize;
        while let Some((h, depth)) = stack.pop() {
            if depth == 4 {
                continue;
            }
            for &a in &alphabet {
                let next = hash_update(&h, a);
                assert!(seen.insert(next), "hash collision at depth {}", depth + 1);
                count += 1;
                stack.push((next, depth + 1));
            }
        }
        // 1 + 16 + 16^2 + 16^3 + 16^4
        assert_eq!(count, 69_905);

        // Distinct legal paths never share an evidence assignment.
        for (name, source, _) in corpus_runs() {
            let b = build(&source);
            let proofs = enumerate_legal_proofs(&b.analysis.bundle, 1, 9, 5_000);
            assert!(!proofs.is_empty(), "{name}: no legal proofs enumerated");
            let mut by_evidence: HashMap<(Vec<bool>, Vec<u64>, ReturnHash), Vec<u64>> =
                HashMap::new();
            for p in proofs {
                let key = (p.bits.clone(), p.addrs.clone(), p.ret_hash);
                match by_evidence.get(&key) {
                    Some(path) => assert_eq!(
                        path, &p.path,
                        "{name}: two distinct paths share identical evidence"
                    ),
                    None => {
                        by_evidence.insert(key, p.path);
                    }
                }
            }
        }
        assert!(start.elapsed().as_secs() < 120, "collision checks exceeded 120s");
    });
}

// --- 7. Golden hash vectors -------------------------------------------------------

#[test]
fn criterion_7_golden_hash_vectors() {
    criterion(7, "golden hash vectors", || {
        fn hx(s: &str) -> ReturnHash {
            let mut out = [0u8; 32];
            hex::decode_to_slice(s, &mut out).unwrap();
            out
        }

        // Reference values computed with Python hashlib.blake2s
        // (digest_size 32) over prev_hash || addr_le8.
        let chain: &[(u64, &str)] = &[
            (0x1000, "ddceabf1157725092cf57a175613726864311919b3a83c5d02c74893114a07c0"),
            (0x1024, "424a25c059b3dac19f77fb0053b7c4c1d8b05b54158b7e2533cf0dc3af20ee16"),
            (0x2008, "fa20488df9296540c8a8df76e954dad4c5d1584fb629cdd546b99b7773038230"),
            (0xffffffff, "39771b7a91b101a91202aa522a8c345d24c59b1ebb2f4abaadd4210fee3d1d5f"),
            (0x1, "0b128367f0388b3fb8854ca2f80876b5432bad80f964150a238dfe043666dc88"),
        ];
        let steps: &[(&str, u64, &str)] = &[
            (
                "a54dca182530bb1d6d132cded6237b2ed91e3f721fcb1971174494d6493c9d5c",
                0xbeaa301850c5,
                "53d09edf93d51baa8c53b3da81e3cb491b0fac9fa26d15efb6f8b5521a95443e",
            ),
            (
                "31201e69fedaa0eee8b9997f5c7c2999fdafe593253cd654af4dfad71427a0ae",
                0xb34ab1fee08f,
                "144834081277f88b999d15511e24cdcd8bfa2ad09f3ef97aa84b792d19d7b0bb",
            ),
            (
                "fee9232f8af2211f9ee491c5b10becb5563bfc1e6f93427ecbc8fe2955e5cd8e",
                0x461be2257159,
                "8517f1bb20207ff63b2168f62c3f9022d3f74c949b59ccd5189c586129dfd902",
            ),
            (
                "dc8ed4b7c2764d2a5a4d767706f85d8690024ad6bda3401be9c8cbccc935f6cd",
                0x61970fef7928,
                "b913ccf993ad218e36f6d665068df52dd6849c15f41a73b714bbcdfc232e352f",
            ),
            (
                "226ae15338ae1a34004d33ba0d246ac04c81b1baf23e3bf9eef5f79f2b4934af",
                0x878ebd87a865,
                "989d84d7efb401f8f9964378eb566a915c0de07af7f49e088ed916c2f6b5435d",
            ),
            (
                "f5520b69b94b0d982e85bb55b672a872637acd7466fcb60e0e8ff18463b0e4b2",
                0x293c5d58c705,
                "08aa266bc36b96c446e0edaed64f8dfc7a88fc7b0799b82de95d92a3ce521644",
            ),
        ];
        assert!(chain.len() + steps.len() >= 10);

        let mut h = INITIAL_HASH;
        for (addr, want) in chain {
            h = hash_update(&h, *addr);
            assert_eq!(h, hx(want), "chain vector at {addr:#x}");
        }
        for (prev, addr, want) in steps {
            assert_eq!(hash_update(&hx(prev), *addr), hx(want), "step vector at {addr:#x}");
        }
    });
}

// --- 8. Wire / codec robustness ----------------------------------------------------

fn random_traces(rng: &mut impl Rng) -> Traces {
    let addrs: Vec<u64> = (0..rng.gen_range(0..8)).map(|_| rng.gen()).collect();
    let bits = BitTrace::from_bits((0..rng.gen_range(0..40)).map(|_| rng.gen_bool(0.5)));
    Traces { addrs, bits }
}

fn random_sub(rng: &mut impl Rng, depth: u32) -> opattest_core::measure::SubBlob {
    opattest_core::measure::SubBlob {
        irq_id: rng.gen_range(0..8),
        handler_entry: rng.gen(),
        resume_addr: rng.gen(),
        traces: random_traces(rng),
        ret_hash: rng.gen(),
        children: if depth == 0 && rng.gen_bool(0.3) {
            vec![random_sub(rng, 1)]
        } else {
            vec![]
        },
    }
}

#[test]
fn criterion_8_codec_robustness() {
    criterion(8, "wire and codec robustness", || {
        let mut rng = ChaCha8Rng::seed_from_u64(88);
        let key = keys::generate(Some([8u8; 32]));

        // Round-trip 10,000 random valid blobs byte-exactly.
        for i in 0..10_000 {
            let mut blob = Blob {
                version: opattest_core::measure::BLOB_VERSION,
                op_id: rng.gen(),
                segment_index: rng.gen_range(0..4),
                prev_hash: rng.gen(),
                nonce: rng.gen(),
                traces: random_traces(&mut rng),
                ret_hash: rng.gen(),
                cvi_flag: rng.gen_bool(0.2),
                cvi_records: (0..rng.gen_range(0..4)).map(|_| (rng.gen(), rng.gen())).collect(),
                subs: if rng.gen_bool(0.3) { vec![random_sub(&mut rng, 0)] } else { vec![] },
                signature: vec![],
            };
            blob.sign(&key);
            let bytes = blob.encode();
            let back = Blob::decode(&bytes).unwrap_or_else(|e| panic!("round trip {i}: {e}"));
            assert_eq!(back.encode(), bytes, "round trip {i} not byte-exact");
            assert!(back.verify_signature(&key.verifying_key()));
        }

        // Mutate one byte of a benign attestation 10,000 times: every
        // mutant must fail to decode or fail signature - never verify.
        let (_, source, inputs) = &corpus_runs()[1]; // house_alarm
        let b = build(source);
        let nonce: Nonce = [7u8; 16];
        let run = attest(&b, inputs, vec![], vec![], &key, nonce, 5_000_000);
        let file = &run.attestations[&1];
        assert!(verify(&b.analysis.bundle, &key.verifying_key(), &nonce, file).pass);
        let baseline = file.encode();
        for _ in 0..10_000 {
            let mut bytes = baseline.clone();
            let pos = rng.gen_range(0..bytes.len());
            let bit = 1u8 << rng.gen_range(0..8);
            bytes[pos] ^= bit;
            match BlobFile::decode(&bytes) {
                Err(_) => {}
                Ok(mutant) => {
                    let report =
                        verify(&b.analysis.bundle, &key.verifying_key(), &nonce, &mutant);
                    assert!(!report.pass, "mutated byte {pos} still verifies");
                    assert!(
                        report.has(FailureClass::Signature),
                        "mutated byte {pos}: expected a signature failure, got {:?}",
                        report.failures
                    );
                }
            }
        }

        // Replaying evidence against a fresh nonce is rejected.
        let other: Nonce = [1u8; 16];
        let report = verify(&b.analysis.bundle, &key.verifying_key(), &other, file);
        assert!(!report.pass && report.has(FailureClass::NonceMismatch));
    });
}

// --- 9. Value-check semantics ------------------------------------------------------

#[test]
fn criterion_9_value_check_semantics() {
    criterion(9, "value-check define/use semantics", || {
        use opattest_core::measure::{Adjusted, Bounds, CviState};

        // Define-then-equal-use passes; an intervening change is caught.
        let id = 0x10008u64;
        let mut s = CviState::default();
        s.define(id, 41);
        s.check_use(id, 41, 0x1000);
        assert!(!s.flag, "matching use flagged");
        s.define(id, 41);
        s.check_use(id, 42, 0x1004);
        assert!(s.flag, "intervening change missed");
        assert_eq!(s.records, vec![(id, 0x1004)]);

        // Out-of-bounds pointer accesses check exactly the overlapping
        // bytes of the word, no more and no fewer.
        let mut s = CviState::default();
        let ptr = 0x100200u64;
        s.register_bounds(ptr, Bounds { start: 0x10000, end: 0x10010 });
        assert_eq!(s.bounds_adjust(ptr, 0x10000), Some(Adjusted::InBounds));
        assert_eq!(s.bounds_adjust(ptr, 0x10010), Some(Adjusted::Disjoint));
        assert_eq!(s.bounds_adjust(ptr, 0x1000c), Some(Adjusted::Overlap { lo: 0, hi: 4 }));
        assert_eq!(s.bounds_adjust(ptr, 0xfffc), Some(Adjusted::Overlap { lo: 4, hi: 8 }));
        // Only the in-bounds low half participates in the check.
        s.define_bytes(0x1000c, 0x1111_2222, 0, 4);
        s.check_use_bytes(0x1000c, 0x7777_0000_1111_2222, 0x1000, 0, 4);
        assert!(!s.flag, "out-of-bounds bytes took part in the check");
        s.check_use_bytes(0x1000c, 0x7777_0000_1111_0000, 0x1000, 0, 4);
        assert!(s.flag, "in-bounds byte change missed");

        // A critical local in a recursive function is tracked per frame:
        // each depth's value survives the inner calls.
        let src = "\
func rec(n) {
  local critical v
  local r
entry:
  v = n * 10
  br n > 0, more, base
more:
  r = n - 1
  call rec(r) -> r then back
back:
  v = v + r
  ret v
base:
  ret v
}
func main() {
  local x
entry:
  attest_begin 1
  x = 3
  call rec(x) -> x then fin
fin:
  output x
  attest_end 1
  halt
}
";
        let b = build(src);
        let key = keys::generate(Some([9u8; 32]));
        let nonce: Nonce = [3u8; 16];
        let run = attest(&b, &[], vec![], vec![], &key, nonce, 100_000);
        assert!(run.error.is_none(), "recursive run failed: {:?}", run.error);
        let report = verify_op(&b, &run, 1, &key, &nonce);
        assert!(report.pass, "recursive frames confused the value checks: {:?}", report.failures);
    });
}

// --- 10. Verifier cost is linear -----------------------------------------------------

#[test]
fn criterion_10_verifier_linear_cost() {
    criterion(10, "verification cost linear in path length", || {
        let sizes = [100usize, 1_000, 10_000];
        let mut work = Vec::new();
        for &n in &sizes {
            let b = build(&gen_straightline(n));
            let mut cursor = TraceCursor::new(std::iter::empty::<&Traces>());
            let out =
                abstract_exec(&b.analysis.bundle, 1, Span::Operation { op_id: 1 }, &mut cursor);
            assert!(out.failure.is_none(), "n={n}: {:?}", out.failure);
            assert!(out.path.len() >= n, "n={n}: walked only {} blocks", out.path.len());
            work.push(out.work as f64);
        }
        let slope_a = (work[1] - work[0]) / (sizes[1] - sizes[0]) as f64;
        let slope_b = (work[2] - work[1]) / (sizes[2] - sizes[1]) as f64;
        let rel = (slope_a - slope_b).abs() / slope_b;
        assert!(
            rel <= 0.10,
            "slopes {slope_a:.4} vs {slope_b:.4} differ by {:.1}%",
            rel * 100.0
        );
    });
}
