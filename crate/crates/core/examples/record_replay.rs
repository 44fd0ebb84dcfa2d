// Record provider responses once, then replay them with no provider at all.

use std::sync::Arc;

use tracelink::gateway::{FailingProvider, Gateway, MessageCoverageOracle, Mode, ProviderConfig, ReplayCache};

pub fn run() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("replay.jsonl");
    let prompt = "Stakeholder Requirement: <stakeholder> If Trigger_Condition = \"RUN\", and the module M does NOT receive the message ABS_1 for a certain number of message cycles, then the module M shall: Set the DTC to \"Present\". </stakeholder>\nSystem requirement: <system> Mature: ABS_1 is missing. Demature: ABS_1 is received.</system>\nResponse:";

    let cache = Arc::new(ReplayCache::open(&path)?);
    let recorder = Gateway::new(Arc::new(MessageCoverageOracle::default()), ProviderConfig::default())?
        .with_mode(Mode::Record, Some(cache))?;
    let live = recorder.complete(prompt)?;
    println!("recorded: {}", live.lines().last().unwrap_or(""));

    let cache = Arc::new(ReplayCache::open(&path)?);
    let replayer = Gateway::new(Arc::new(FailingProvider::permanent()), ProviderConfig::default())?
        .with_mode(Mode::Replay, Some(cache))?;
    let replayed = replayer.complete(prompt)?;
    println!("replayed identically: {}", replayed == live);
    println!("a prompt that was never recorded: {}", replayer.complete("something else").unwrap_err());
    Ok(())
}

fn main() {
    run().unwrap();
}
