use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use explorer_lab::adversary::{
    fixed_block_pair, part1_pair, part3_pair, DiagonalEnvironment, Flipped, LockParams, PolicyOracle, TablePolicy,
};
use explorer_lab::discount::Discount;
use explorer_lab::env::{
    is_consistent, load_class, Action, Environment, EnvironmentClass, History, Reward, Step,
};
use explorer_lab::lab::{run_config_file, summary_json, LabError};
use explorer_lab::planner::{Planner, PlanError};

#[derive(Parser)]
#[command(name = "explorer-lab", version, about = "Exploration experiments in deterministic environments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a TOML or JSON config and write its artifacts.
    Run { config: PathBuf },
    /// Play a fixed policy in an adversarial environment pair and print the
    /// rewards as CSV.
    Adversary {
        variant: Variant,
        /// Switch-on time T.
        #[arg(long, default_value_t = 1)]
        switch_on: u64,
        /// Locked-down penalty (part3, fixed).
        #[arg(long, default_value = "1/4")]
        epsilon: Reward,
        /// Unlocking block length (fixed).
        #[arg(long, default_value_t = 2)]
        block: u64,
        /// Discount, used by part1 to size the unlocking block.
        #[arg(long, default_value = "geometric:0.5")]
        discount: Discount,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[arg(long, value_enum, default_value_t = PolicyChoice::Down)]
        policy: PolicyChoice,
        /// Seed of the table policy diagonalized by the diagonal variant.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        window: usize,
    },
    /// Plan in one environment of a class and print its ε-optimal value.
    ///
    /// CLASS is a JSON class file or one of the built-in pairs `part1`,
    /// `part3` (index 1 is μ, 2 is ν, with T = 1 and ε = 1/4). HISTORY is a
    /// space-separated list of `action:reward` or `action:obs:reward` tokens;
    /// a bare action takes its percept from the environment.
    Value {
        class: String,
        index: usize,
        #[arg(default_value = "")]
        history: String,
        #[arg(long, default_value_t = 1.0 / 1024.0)]
        epsilon: f64,
        #[arg(long, default_value = "geometric:0.5")]
        discount: Discount,
    },
    /// List and validate the environments of a class file.
    Enumerate { class_file: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Part1,
    Part3,
    Fixed,
    Diagonal,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyChoice {
    Up,
    Down,
    Alternate,
    /// The diagonalized table policy itself (diagonal only).
    Table,
    /// The table policy with every action flipped (diagonal only).
    Flipped,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn other(message: impl ToString) -> Self {
        Failure { code: 1, message: message.to_string() }
    }
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        let code = if matches!(e, PlanError::BudgetExceeded { .. }) { 3 } else { 1 };
        Failure { code, message: e.to_string() }
    }
}

// Writes to stdout, tolerating a closed pipe (`| head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn fixed_action(choice: PolicyChoice, t: u64) -> Action {
    match choice {
        PolicyChoice::Up => Action::UP,
        PolicyChoice::Down => Action::DOWN,
        _ => {
            if t % 2 == 1 {
                Action::UP
            } else {
                Action::DOWN
            }
        }
    }
}

fn adversary(
    variant: Variant,
    params: LockParams,
    block: u64,
    discount: &Discount,
    steps: usize,
    policy: PolicyChoice,
    seed: u64,
    window: usize,
) -> Result<(), Failure> {
    let mut out = String::new();
    if let Variant::Diagonal = variant {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = TablePolicy::random(&mut rng, window, 2);
        let env = DiagonalEnvironment::new(table.clone());
        let flipped = Flipped(table.clone());
        let mut h = History::new();
        out.push_str("t,action,oracle_action,reward\n");
        for _ in 0..steps {
            let t = h.next_time();
            let predicted = table.decide(h.view()).map_err(Failure::other)?;
            let a = match policy {
                PolicyChoice::Table => predicted,
                PolicyChoice::Flipped => flipped.decide(h.view()).map_err(Failure::other)?,
                other => fixed_action(other, t),
            };
            let p = env.percept(h.view(), a).map_err(Failure::other)?;
            out.push_str(&format!("{t},{a},{predicted},{}\n", p.reward));
            h.push(a, p);
        }
        emit(&out);
        return Ok(());
    }
    if matches!(policy, PolicyChoice::Table | PolicyChoice::Flipped) {
        return Err(Failure::config("table and flipped policies apply to the diagonal variant only"));
    }
    let (mu, nu) = match variant {
        Variant::Part1 => part1_pair(&params, discount),
        Variant::Part3 => part3_pair(&params),
        Variant::Fixed => fixed_block_pair(&params, block),
        Variant::Diagonal => unreachable!(),
    };
    let mut h = History::new();
    out.push_str("t,action,mu_reward,nu_reward,lock_open\n");
    for _ in 0..steps {
        let t = h.next_time();
        let a = fixed_action(policy, t);
        let m = mu.percept(h.view(), a).map_err(Failure::other)?;
        let n = nu.percept(h.view(), a).map_err(Failure::other)?;
        h.push(a, n);
        let open = nu.is_open(h.view()).map_err(Failure::other)?;
        out.push_str(&format!("{t},{a},{},{},{}\n", m.reward, n.reward, open as u8));
    }
    emit(&out);
    Ok(())
}

fn builtin_class(name: &str, discount: &Discount) -> Option<EnvironmentClass> {
    let params = LockParams::default();
    let mut class = EnvironmentClass::new();
    match name {
        "part1" => {
            let (mu, nu) = part1_pair(&params, discount);
            class.push(mu);
            class.push(nu);
        }
        "part3" => {
            let (mu, nu) = part3_pair(&params);
            class.push(mu);
            class.push(nu);
        }
        _ => return None,
    }
    Some(class)
}

fn parse_history(env: &dyn Environment, text: &str) -> Result<History, Failure> {
    let mut h = History::new();
    for (position, token) in text.split_whitespace().enumerate() {
        if token.contains(':') {
            let step: Step = token
                .parse()
                .map_err(|reason| Failure::config(format!("history token {position} {token:?}: {reason}")))?;
            h.push(step.action, step.percept);
        } else {
            let a = token
                .parse::<u8>()
                .map(Action)
                .map_err(|_| Failure::config(format!("history token {position} {token:?}: bad action")))?;
            let p = env.percept(h.view(), a).map_err(|e| Failure::config(e.to_string()))?;
            h.push(a, p);
        }
    }
    Ok(h)
}

fn value(class: &str, index: usize, history: &str, epsilon: f64, discount: &Discount) -> Result<(), Failure> {
    let class = match builtin_class(class, discount) {
        Some(c) => c,
        None => load_class(class).map_err(|e| Failure::config(e.to_string()))?,
    };
    let env = class.get(index).map_err(|e| Failure::config(e.to_string()))?;
    let h = parse_history(env, history)?;
    if !is_consistent(env, &h) {
        eprintln!("warning: the history is not consistent with environment {index}");
    }
    let t = h.next_time();
    let horizon = discount.effective_horizon(t, 1.0 - epsilon).map_err(|e| Failure::config(e.to_string()))?;
    let cursor = explorer_lab::env::cursor_at(env, h.view()).map_err(Failure::other)?;
    let plan = Planner::default().optimal_plan_from(env, cursor.as_ref(), h.steps(), epsilon, discount)?;
    let actions: Vec<String> = plan.actions.iter().map(|a| a.to_string()).collect();
    emit(&format!(
        "t = {t}\nhorizon = {horizon}\nvalue = {}\nerror_bound = {}\naction = {}\nplan = {}\n",
        plan.value.value,
        plan.value.error_bound,
        plan.first_action(),
        actions.join(" ")
    ));
    Ok(())
}

fn enumerate(path: &PathBuf) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    let file = explorer_lab::env::parse_class_file(&text, &path.display().to_string())
        .map_err(|e| Failure::config(e.to_string()))?;
    let mut errors = 0;
    for (i, spec) in file.environments.iter().enumerate() {
        let name = spec.name.clone().unwrap_or_else(|| "-".into());
        match spec.build(i + 1) {
            Ok(env) => println!(
                "{}\t{name}\tstates={}\tactions={}\tobservations={}\tok",
                i + 1,
                env.states(),
                env.action_count(),
                env.observation_count()
            ),
            Err(e) => {
                errors += 1;
                println!("{}\t{name}\tinvalid: {e}", i + 1);
            }
        }
    }
    if errors > 0 {
        return Err(Failure::config(format!("{errors} invalid environment(s) in {}", path.display())));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config } => run_config_file(&config).map_err(Failure::from).map(|out| {
            emit(&summary_json(&out.summary));
        }),
        Command::Adversary { variant, switch_on, epsilon, block, discount, steps, policy, seed, window } => {
            match LockParams::new(switch_on, epsilon.ratio()) {
                Ok(params) => adversary(variant, params, block, &discount, steps, policy, seed, window),
                Err(e) => Err(Failure::config(e)),
            }
        }
        Command::Value { class, index, history, epsilon, discount } => {
            value(&class, index, &history, epsilon, &discount)
        }
        Command::Enumerate { class_file } => enumerate(&class_file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
