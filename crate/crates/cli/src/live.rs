//! Live mode: the flight stack and the ground station run on separate threads, paced by the
//! wall clock, and talk only through the framed TCP link. The ground side executes the
//! scenario's operator script and serves the console API.
//!
//! Unlike headless runs, live runs are not bit-reproducible: a command lands on the first
//! flight tick after it arrives, which depends on thread timing.

use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use anyhow::{anyhow, Context, Result};

use sbsim_core::downlink::{split_frames, TcpLink};
use sbsim_core::ground::{GroundDatabase, GroundStation};
use sbsim_core::scenario::{collect, Counters, RunArtifacts, Scenario, Simulation};

use crate::service::{Service, Status};

const LINK_QUEUE_DEPTH: usize = 4096;
const GROUND_POLL: Duration = Duration::from_millis(5);
const DRAIN_GRACE: Duration = Duration::from_millis(200);

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// Wall-clock length of one simulation tick.
    pub tick_period: Duration,
    /// Where the ground station listens for the flight side. Port 0 picks a free port.
    pub link_addr: SocketAddr,
}

pub struct LiveRun {
    pub service: Arc<Service>,
    pub link_addr: SocketAddr,
    scenario: Scenario,
    flight: JoinHandle<Result<(Simulation, Vec<u8>)>>,
    ground: JoinHandle<()>,
}

pub fn start(scenario: &Scenario, opts: &LiveOptions) -> Result<LiveRun> {
    scenario.validate()?;
    let sim = Simulation::new(scenario)?;

    let listener = TcpListener::bind(opts.link_addr).with_context(|| format!("binding link {}", opts.link_addr))?;
    let link_addr = listener.local_addr()?;
    let flight_link = TcpLink::connect(link_addr, LINK_QUEUE_DEPTH)?;
    let (stream, _) = listener.accept()?;
    let ground_link = TcpLink::from_stream(stream, LINK_QUEUE_DEPTH)?;

    let service = Service::new(
        GroundStation::new(GroundDatabase::builtin()),
        Some(ground_link.sender()),
        Status {
            scenario: scenario.name.clone(),
            tick: 0,
            duration_ticks: scenario.duration_ticks,
            running: true,
        },
    );
    let done = Arc::new(AtomicBool::new(false));

    let flight = {
        let service = service.clone();
        let done = done.clone();
        let duration = scenario.duration_ticks;
        let period = opts.tick_period;
        thread::spawn(move || {
            let r = fly(sim, flight_link, &service, duration, period);
            done.store(true, Ordering::SeqCst);
            r
        })
    };

    let ground = {
        let service = service.clone();
        let script = scenario.operator_script.clone();
        thread::spawn(move || {
            let mut script = script.into_iter().peekable();
            let mut finished_at: Option<Instant> = None;
            loop {
                while let Some(c) = script.next_if(|c| c.tick <= service.tick()) {
                    if let Err(e) = service.command_named(&c.command, &c.args) {
                        eprintln!("operator script: {}: {e}", c.command);
                    }
                }
                match ground_link.recv_timeout(GROUND_POLL) {
                    Some(body) => {
                        service.ingest(&body);
                    }
                    None if done.load(Ordering::SeqCst) => {
                        let t = *finished_at.get_or_insert_with(Instant::now);
                        if t.elapsed() >= DRAIN_GRACE {
                            break;
                        }
                    }
                    None => {}
                }
            }
            service.flush();
            service.set_running(false);
        })
    };

    Ok(LiveRun {
        service,
        link_addr,
        scenario: scenario.clone(),
        flight,
        ground,
    })
}

fn fly(
    mut sim: Simulation,
    link: TcpLink,
    service: &Service,
    duration: u64,
    period: Duration,
) -> Result<(Simulation, Vec<u8>)> {
    let tx = link.sender();
    let started = Instant::now();
    let mut downlink = Vec::new();
    let mut alerts_seen = 0;
    for tick in 0..duration {
        // The shared clock stands in for station time; both sides read the same wall clock.
        service.set_tick(tick);
        let mut uplink = Vec::new();
        while let Some(body) = link.try_recv() {
            uplink.push(body);
        }
        let stream = sim.step(&uplink)?;
        for body in split_frames(&stream)? {
            tx.send(body).map_err(|_| anyhow!("downlink closed"))?;
        }
        downlink.extend_from_slice(&stream);
        // Alerts are harness-visible only; they never cross the link.
        for a in &sim.defenses().alerts()[alerts_seen..] {
            service.push_alert(a.clone());
        }
        alerts_seen = sim.defenses().alerts().len();
        let due = started + period.saturating_mul(u32::try_from(tick + 1).unwrap_or(u32::MAX));
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    }
    drop(tx);
    link.close();
    Ok((sim, downlink))
}

impl LiveRun {
    pub fn is_finished(&self) -> bool {
        self.flight.is_finished() && self.ground.is_finished()
    }

    /// Waits for both sides and snapshots the run.
    pub fn wait(self) -> Result<(RunArtifacts, Counters)> {
        let (sim, downlink) = self.flight.join().map_err(|_| anyhow!("flight thread panicked"))??;
        self.ground.join().map_err(|_| anyhow!("ground thread panicked"))?;
        Ok(self.service.with_ground(|g| collect(&self.scenario, &sim, g, downlink)))
    }
}
