#![allow(dead_code)]

use std::sync::Arc;
use std::thread;

use tlc_core::control_api::{ControlCore, Server, SharedCore, WireClient};
use tlc_core::network::{LinkId, NetworkBuilder, RoadNetwork, Route};
use tlc_core::scenario::{build_engine, demand_for, ExperimentConfig, PlanVariant};
use tlc_core::signal::{Phase, SemaphorePlan};
use tlc_core::sim::{Engine, EngineConfig};

/// Source A feeds signalized J (one maneuver) which feeds sink B. Both links
/// are 30 m long (4 vehicles of storage), one step of free flow, capacity 1.
pub fn oracle_network() -> (Arc<RoadNetwork>, LinkId, LinkId) {
    let mut b = NetworkBuilder::new();
    let a = b.junction("A", (0, 0), false, 0);
    let j = b.junction("J", (0, 1), true, 1);
    let z = b.junction("B", (0, 2), false, 0);
    let in_link = b.link(a, j, 30.0, 1, 1, Some(0));
    let out_link = b.link(j, z, 30.0, 1, 1, None);
    (Arc::new(b.build().unwrap()), in_link, out_link)
}

/// Red 2, green 2, red 3.
pub fn oracle_plan() -> SemaphorePlan {
    SemaphorePlan::new(vec![
        Phase::new(2, "r", false).unwrap(),
        Phase::new(2, "G", false).unwrap(),
        Phase::new(3, "r", false).unwrap(),
    ])
    .unwrap()
}

/// Three vehicles departing A at step 0.
pub fn oracle_engine() -> (Engine, LinkId) {
    let (net, in_link, out_link) = oracle_network();
    let mut engine =
        Engine::new(Arc::clone(&net), &oracle_plan(), EngineConfig::default()).unwrap();
    for id in 1..=3 {
        engine
            .insert_vehicle(id, Route::new(&net, vec![in_link, out_link]).unwrap(), 0)
            .unwrap();
    }
    (engine, in_link)
}

/// 3×3 grid at 200 steps per hour over one day.
pub fn small_config() -> ExperimentConfig {
    ExperimentConfig::from_toml_str("steps_per_hour = 200\ndays = 1").unwrap()
}

pub fn small_engine(plan: PlanVariant) -> Engine {
    let cfg = small_config();
    let demand = demand_for(&cfg, 7000, 3).unwrap();
    build_engine(&cfg, plan, &demand).unwrap()
}

pub fn scaled_config() -> ExperimentConfig {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/scaled.toml");
    ExperimentConfig::load(std::path::Path::new(path)).unwrap()
}

/// Starts a server on an ephemeral port; the thread ends when the
/// controlling client disconnects.
pub fn spawn_server(
    core: SharedCore,
) -> (WireClient, thread::JoinHandle<()>, std::net::SocketAddr) {
    let server = Server::bind("127.0.0.1:0", core).unwrap();
    let addr = server.local_addr().unwrap();
    let handle = thread::spawn(move || server.run().unwrap());
    (WireClient::connect(addr).unwrap(), handle, addr)
}

pub fn shared(engine: Engine) -> SharedCore {
    ControlCore::shared(engine)
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tlc_core::control_api::{Command, Verb};

/// A fixed pseudo-random command script against the small semi-fixed grid.
/// It never depends on responses, so both transports see the same input.
pub fn command_script(len: usize, seed: u64) -> Vec<Command> {
    let tls: Vec<String> = (0..3)
        .flat_map(|r| (0..3).map(move |c| format!("J_{r}_{c}")))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let tl = tls[rng.gen_range(0..tls.len())].clone();
        let green = |rng: &mut ChaCha8Rng| 20 + 5 * rng.gen_range(0..9u32);
        let (verb, args) = match rng.gen_range(0..16) {
            0..=3 => (
                Verb::SimStep,
                Some(json!({ "steps": rng.gen_range(1..40u64) })),
            ),
            4 => (Verb::GetTime, None),
            5 => (Verb::TlList, None),
            6 => (Verb::TlGetPlan, Some(json!({ "tl": tl }))),
            7 => {
                let a = green(&mut rng);
                (
                    Verb::TlSetPlanPending,
                    Some(json!({ "tl": tl, "durations": [a, green(&mut rng)] })),
                )
            }
            8 => (Verb::TlGetCyclePos, Some(json!({ "tl": tl }))),
            9 => (Verb::TlCountNear, Some(json!({ "tl": tl }))),
            10 => (Verb::TlNeighbors, Some(json!({ "tl": tl }))),
            11 => (Verb::VehDrainArrived, None),
            12 => {
                let period = ["Low", "Medium", "High"][rng.gen_range(0..3)];
                (
                    Verb::SetPeriodPlan,
                    Some(json!({ "tl": tl, "period": period })),
                )
            }
            13 => {
                // Out of range, wrong arity or unknown light.
                let args = match rng.gen_range(0..3) {
                    0 => json!({ "tl": tl, "durations": [65, 20] }),
                    1 => json!({ "tl": tl, "durations": [30] }),
                    _ => json!({ "tl": "J_9_9", "durations": [30, 30] }),
                };
                (Verb::TlSetPlanPending, Some(args))
            }
            14 => {
                let to = tls[rng.gen_range(0..tls.len())].clone();
                let msg = json!({
                    "performative": "QUERY_REF",
                    "sender": tl,
                    "receiver": to,
                    "conversation": format!("{tl}:{i}"),
                    "content": "reward",
                });
                (Verb::AgentMsg, Some(msg))
            }
            _ => (Verb::AgentMsg, Some(json!({ "poll": tl }))),
        };
        out.push(Command {
            id: i as i64 + 1,
            verb,
            args,
        });
    }
    out
}

pub fn drained(payload: &Value) -> Vec<tlc_core::metrics::VehicleRecord> {
    serde_json::from_value(payload["vehicles"].clone()).unwrap()
}
