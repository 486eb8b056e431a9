//! `texir`: batch driver for baking, optimization, rendering and evaluation.

mod args;
mod cmd;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use texir_core::Error;

#[derive(Parser, Debug)]
#[command(name = "texir", version, about = "Texture-based lighting and SVBRDF texture recovery")]
struct Cli {
    /// Worker threads; results do not depend on this. Defaults to the number of cores.
    #[arg(long, global = true, env = "TEXIR_THREADS")]
    threads: Option<usize>,

    /// Base seed for every random stream of the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the bundled three-room scene with ground-truth materials.
    Synth(cmd::synth::SynthArgs),
    /// Build the lighting texture and bake the irradiance texture.
    Bake(cmd::bake::BakeArgs),
    /// Recover albedo and roughness textures from the posed images.
    Optimize(cmd::optimize::OptimizeArgs),
    /// Render scene cameras or a novel view.
    Render(cmd::render::RenderArgs),
    /// Replace the emissive texture and re-bake irradiance.
    Relight(cmd::edit::RelightArgs),
    /// Overwrite the material of one semantic class.
    Edit(cmd::edit::EditArgs),
    /// Segment the mesh into rooms.
    Rooms(cmd::analyze::RoomsArgs),
    /// Detect virtual highlights in every view.
    Vhl(cmd::analyze::VhlArgs),
    /// Compare two images (MSE, PSNR, MAE, SSIM).
    Eval(cmd::eval::EvalArgs),
    /// Compare TBL, SH and SG lighting on virtual probe spheres.
    Spheres(cmd::eval::SpheresArgs),
}

/// Process context shared by all commands.
pub struct Ctx {
    pub seed: u64,
    pub threads: usize,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_bad_input() {
        2
    } else if err.is_invariant_violation() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let threads = match cli.threads {
        Some(0) => {
            eprintln!("texir: error: --threads must be positive");
            return ExitCode::from(2);
        }
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("texir: error: cannot start worker pool: {e}");
        return ExitCode::from(1);
    }
    let ctx = Ctx { seed: cli.seed, threads };

    let result = match cli.command {
        Command::Synth(a) => cmd::synth::run(&ctx, a),
        Command::Bake(a) => cmd::bake::run(&ctx, a),
        Command::Optimize(a) => cmd::optimize::run(&ctx, a),
        Command::Render(a) => cmd::render::run(&ctx, a),
        Command::Relight(a) => cmd::edit::run_relight(&ctx, a),
        Command::Edit(a) => cmd::edit::run_edit(&ctx, a),
        Command::Rooms(a) => cmd::analyze::run_rooms(&ctx, a),
        Command::Vhl(a) => cmd::analyze::run_vhl(&ctx, a),
        Command::Eval(a) => cmd::eval::run_eval(&ctx, a),
        Command::Spheres(a) => cmd::eval::run_spheres(&ctx, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("texir: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
