//! Command-line driver for the attestation pipeline: static checks,
//! analysis export, local attested runs, verification, the TCP
//! challenge-response endpoints, the bundled attack scenarios, and the
//! instrumentation/evidence size comparisons.

use clap::{Args, Parser, Subcommand};
use ed25519_dalek::{SigningKey, VerifyingKey};
use opattest_core::analysis::{self, count_address_based_sites};
use opattest_core::instrument::{instrument, Instrumented};
use opattest_core::measure::blob::{BlobFile, Nonce};
use opattest_core::measure::keys;
use opattest_core::mini_ir::{parse_program, Program};
use opattest_core::prover::{run_benign_pair, Machine, RunConfig};
use opattest_core::protocol::{challenge, serve_once, ProverConfig};
use opattest_core::scenario::Scenario;
use opattest_core::verifier::verify;
use rand::RngCore;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_VERIFY: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "opattest", version, about = "Operation execution integrity attestation toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ProgramArg {
    /// Program source file (.mir).
    program: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, validate, and scope-check a program.
    Check(ProgramArg),
    /// Run the static analysis and emit the verifier bundle as JSON.
    Analyze {
        #[command(flatten)]
        program: ProgramArg,
        /// Output path; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Generate a signing keypair (hex seed + hex public key).
    Keygen {
        /// Path for the private seed; `<seed>.pub` gets the public key.
        seed: PathBuf,
    },
    /// Run a program locally under measurement and write the attestation.
    Attest {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        op_id: u32,
        /// Signing key seed file.
        #[arg(long)]
        key: PathBuf,
        /// Inputs fed to `input` instructions.
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<i64>,
        /// Hex nonce (32 hex chars); random when omitted.
        #[arg(long)]
        nonce: Option<String>,
        /// Scenario JSON with faults/interrupts to inject.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Flush segment capacity in trace events.
        #[arg(long)]
        segment_capacity: Option<usize>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Verify an attestation file against a program.
    Verify {
        #[command(flatten)]
        program: ProgramArg,
        /// Attestation file written by `attest` or `request`.
        blob: PathBuf,
        /// Public key file.
        #[arg(long)]
        key: PathBuf,
        /// Hex nonce the challenge used.
        #[arg(long)]
        nonce: String,
        /// Also print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve attestation challenges over TCP (prover side).
    Serve {
        #[command(flatten)]
        program: ProgramArg,
        /// host:port to listen on.
        #[arg(long)]
        listen: String,
        #[arg(long)]
        key: PathBuf,
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<i64>,
        /// Serve one challenge and exit (for scripting).
        #[arg(long)]
        once: bool,
    },
    /// Challenge a remote prover and verify its evidence (verifier side).
    Request {
        #[command(flatten)]
        program: ProgramArg,
        /// host:port of the prover.
        #[arg(long)]
        endpoint: String,
        #[arg(long)]
        op_id: u32,
        /// Public key file.
        #[arg(long)]
        key: PathBuf,
    },
    /// Run attack scenarios and check each is detected as expected.
    Attack {
        #[command(flatten)]
        program: ProgramArg,
        /// Scenario JSON files.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Print instrumentation-site and evidence-size comparisons as CSV.
    Compare {
        #[command(flatten)]
        program: ProgramArg,
        #[arg(long)]
        op_id: u32,
        #[arg(long, value_delimiter = ',')]
        inputs: Vec<i64>,
    },
}

struct Loaded {
    program: Program,
    analysis: analysis::Analysis,
    inst: Instrumented,
}

fn read(path: &Path) -> Result<String, u8> {
    std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_IO
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), u8> {
    std::fs::write(path, bytes).map_err(|e| {
        eprintln!("error: cannot write {}: {e}", path.display());
        EXIT_IO
    })
}

fn load(path: &Path) -> Result<Loaded, u8> {
    let src = read(path)?;
    let program = parse_program(&src).map_err(|diags| {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        EXIT_VALIDATION
    })?;
    let analysis = analysis::analyze(&program, &src).map_err(|diags| {
        for d in &diags {
            eprintln!("{}: {d}", path.display());
        }
        EXIT_VALIDATION
    })?;
    let inst = instrument(&program, &analysis.sites).map_err(|e| {
        eprintln!("{}: instrumentation failed: {e}", path.display());
        EXIT_VALIDATION
    })?;
    Ok(Loaded { program, analysis, inst })
}

fn load_signing_key(path: &Path) -> Result<SigningKey, u8> {
    keys::load_seed(path).map_err(|e| {
        eprintln!("error: cannot load signing key {}: {e}", path.display());
        EXIT_IO
    })
}

fn load_public_key(path: &Path) -> Result<VerifyingKey, u8> {
    keys::load_public(path).map_err(|e| {
        eprintln!("error: cannot load public key {}: {e}", path.display());
        EXIT_IO
    })
}

fn parse_nonce(hex_str: &str) -> Result<Nonce, u8> {
    let bytes = hex::decode(hex_str).map_err(|_| {
        eprintln!("error: nonce must be 32 hex characters");
        EXIT_USAGE
    })?;
    bytes.try_into().map_err(|_| {
        eprintln!("error: nonce must be 16 bytes (32 hex characters)");
        EXIT_USAGE
    })
}

fn load_scenario(path: &Path) -> Result<Scenario, u8> {
    let text = read(path)?;
    Scenario::from_json(&text).map_err(|e| {
        eprintln!("{}: bad scenario: {e}", path.display());
        EXIT_VALIDATION
    })
}

fn run(cmd: Cmd) -> Result<u8, u8> {
    match cmd {
        Cmd::Check(p) => {
            let l = load(&p.program)?;
            println!(
                "ok: {} functions, {} instructions, {} operations",
                l.program.functions.len(),
                l.program.inst_count,
                l.analysis.bundle.scopes.len()
            );
            Ok(EXIT_OK)
        }
        Cmd::Analyze { program, out } => {
            let l = load(&program.program)?;
            let json = l.analysis.bundle.to_json();
            match out {
                Some(path) => write(&path, json.as_bytes())?,
                None => println!("{json}"),
            }
            Ok(EXIT_OK)
        }
        Cmd::Keygen { seed } => {
            let mut seed_bytes = [0u8; 32];
            rand::thread_rng().fill_bytes(&mut seed_bytes);
            let key = keys::generate(Some(seed_bytes));
            keys::save_seed(&key, &seed).map_err(|e| {
                eprintln!("error: cannot write {}: {e}", seed.display());
                EXIT_IO
            })?;
            let mut pub_name = seed.file_name().unwrap_or_default().to_os_string();
            pub_name.push(".pub");
            let pub_path = seed.with_file_name(pub_name);
            keys::save_public(&key.verifying_key(), &pub_path).map_err(|e| {
                eprintln!("error: cannot write {}: {e}", pub_path.display());
                EXIT_IO
            })?;
            println!("wrote {} and {}", seed.display(), pub_path.display());
            Ok(EXIT_OK)
        }
        Cmd::Attest { program, op_id, key, inputs, nonce, scenario, segment_capacity, out } => {
            let l = load(&program.program)?;
            let key = load_signing_key(&key)?;
            let nonce = match nonce {
                Some(h) => parse_nonce(&h)?,
                None => {
                    let mut n: Nonce = [0; 16];
                    rand::thread_rng().fill_bytes(&mut n);
                    n
                }
            };
            let (inputs, faults, irqs) = match scenario {
                Some(path) => {
                    let sc = load_scenario(&path)?;
                    let (faults, irqs) = sc.resolve(&l.program).map_err(|e| {
                        eprintln!("{}: {e}", path.display());
                        EXIT_VALIDATION
                    })?;
                    let ins = if inputs.is_empty() { sc.inputs.clone() } else { inputs };
                    (ins, faults, irqs)
                }
                None => (inputs, vec![], vec![]),
            };
            let mut cfg = RunConfig::new(key, nonce);
            if let Some(c) = segment_capacity {
                cfg.segment_capacity = c;
            }
            let result = Machine::new(&l.program, &l.inst, inputs, faults, irqs, cfg).run();
            if let Some(e) = &result.error {
                eprintln!("note: run ended abnormally: {e}");
            }
            let Some(file) = result.attestations.get(&op_id) else {
                eprintln!("error: operation {op_id} produced no attestation");
                return Err(EXIT_VALIDATION);
            };
            write(&out, &file.encode())?;
            println!(
                "nonce {} segments {} outputs {:?}",
                hex::encode(nonce),
                file.segments.len(),
                result.outputs
            );
            Ok(EXIT_OK)
        }
        Cmd::Verify { program, blob, key, nonce, json } => {
            let l = load(&program.program)?;
            let key = load_public_key(&key)?;
            let nonce = parse_nonce(&nonce)?;
            let bytes = std::fs::read(&blob).map_err(|e| {
                eprintln!("error: cannot read {}: {e}", blob.display());
                EXIT_IO
            })?;
            let file = BlobFile::decode(&bytes).map_err(|e| {
                eprintln!("{}: malformed attestation: {e}", blob.display());
                EXIT_VALIDATION
            })?;
            let report = verify(&l.analysis.bundle, &key, &nonce, &file);
            println!("{report}");
            if json {
                println!("{}", report.to_json());
            }
            Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Cmd::Serve { program, listen, key, inputs, once } => {
            let l = load(&program.program)?;
            let key = load_signing_key(&key)?;
            let listener = std::net::TcpListener::bind(&listen).map_err(|e| {
                eprintln!("error: cannot listen on {listen}: {e}");
                EXIT_IO
            })?;
            let cfg = ProverConfig { program: l.program, inst: l.inst, key, inputs };
            eprintln!("listening on {}", listener.local_addr().unwrap());
            if once {
                serve_once(&cfg, &listener).map_err(|e| {
                    eprintln!("error: {e}");
                    EXIT_IO
                })?;
            } else {
                loop {
                    if let Err(e) = serve_once(&cfg, &listener) {
                        eprintln!("error: {e}");
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Cmd::Request { program, endpoint, op_id, key } => {
            let l = load(&program.program)?;
            let key = load_public_key(&key)?;
            let report = challenge(&*endpoint, op_id, &l.analysis.bundle, &key).map_err(|e| {
                eprintln!("error: challenge failed: {e}");
                EXIT_IO
            })?;
            println!("{report}");
            Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY })
        }
        Cmd::Attack { program, scenarios } => {
            let l = load(&program.program)?;
            let key = keys::generate(Some([11; 32]));
            let mut all_ok = true;
            for path in &scenarios {
                let sc = load_scenario(path)?;
                let (faults, irqs) = sc.resolve(&l.program).map_err(|e| {
                    eprintln!("{}: {e}", path.display());
                    EXIT_VALIDATION
                })?;
                let mut nonce: Nonce = [0; 16];
                rand::thread_rng().fill_bytes(&mut nonce);
                let cfg = RunConfig::new(key.clone(), nonce);
                let result =
                    Machine::new(&l.program, &l.inst, sc.inputs.clone(), faults, irqs, cfg).run();
                let verdict = match result.attestations.get(&sc.op_id) {
                    Some(file) => {
                        let report = verify(&l.analysis.bundle, &key.verifying_key(), &nonce, file);
                        // A structurally clean report can still hide an
                        // unintended operation: compare the reconstructed
                        // path against a benign run's path.
                        let diverged = if report.pass {
                            let benign = Machine::new(
                                &l.program,
                                &l.inst,
                                sc.inputs.clone(),
                                vec![],
                                vec![],
                                RunConfig::new(key.clone(), nonce),
                            )
                            .run();
                            !is_subsequence(&report.path, &benign.path)
                        } else {
                            false
                        };
                        if diverged {
                            println!("  path diverges from the benign run");
                        }
                        for f in &report.failures {
                            println!("  {f}");
                        }
                        sc.matches(&report, diverged)
                    }
                    None => {
                        println!("  no attestation produced (run crashed before evidence)");
                        false
                    }
                };
                println!(
                    "{}: {} ... {}",
                    path.display(),
                    sc.name,
                    if verdict { "outcome as expected" } else { "UNEXPECTED OUTCOME" }
                );
                all_ok &= verdict;
            }
            Ok(if all_ok { EXIT_OK } else { EXIT_VERIFY })
        }
        Cmd::Compare { program, op_id, inputs } => {
            let l = load(&program.program)?;
            let data_sites = l.analysis.sites.data.len();
            let addr_sites = count_address_based_sites(&l.program);
            let key = keys::generate(Some([11; 32]));
            let pair = run_benign_pair(&l.program, &l.inst, inputs, &key, [0; 16]);
            let _ = op_id;
            println!("metric,value");
            println!("data_sites,{data_sites}");
            println!("address_based_sites,{addr_sites}");
            println!("site_ratio,{:.4}", data_sites as f64 / addr_sites.max(1) as f64);
            println!("hashed_evidence_bytes,{}", pair.hashed_bytes);
            println!("baseline_evidence_bytes,{}", pair.plain_bytes);
            println!(
                "evidence_ratio,{:.4}",
                pair.hashed_bytes as f64 / pair.plain_bytes.max(1) as f64
            );
            println!("hashed_return_events,{}", pair.hashed_return_events);
            Ok(EXIT_OK)
        }
    }
}

/// Whether `needle` appears as a contiguous run inside `hay`.
fn is_subsequence(needle: &[u64], hay: &[u64]) -> bool {
    if needle.is_empty() {
        return true;
    }
    hay.windows(needle.len()).any(|w| w == needle)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with exit 0.
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(code) => ExitCode::from(code),
    }
}
