use std::collections::BTreeMap;

use tokio::sync::broadcast::error::TryRecvError;
use tremorlab::clock::MonotonicClock;
use tremorlab::commands::controller_for;
use tremorlab::telemetry::{MessageKind, TelemetryHub, WireMessage};
use tremorlab::RunConfig;
use tremorlab_core::assist::{run_loop, AssistCommand, LoopInput, TickObserver};
use tremorlab_core::dsp::WindowFeatures;
use tremorlab_core::session::{packetize_for_ui, ChannelConfig, synchronize, Condition, SessionRecord};
use tremorlab_core::signalgen::{generate_cohort, generate_session, TaskKind, TaskSpec};

fn session(duration_s: f64) -> SessionRecord {
    let cfg = RunConfig::default();
    let cohort = generate_cohort(2, &cfg.calibration, 3).unwrap();
    let task = TaskSpec {
        duration_s: 60.0,
        ..TaskSpec::standard(TaskKind::PushExtend)
    };
    let mut rec = generate_session(&cohort[0], &task, Condition::Assisted, &ChannelConfig::default_set()).unwrap();
    for s in rec.channels.values_mut() {
        s.packets.retain(|p| p.hub_timestamp_s < duration_s);
    }
    rec
}

#[test]
fn ten_seconds_at_25_hz_is_250_frames() {
    let rec = session(10.0);
    let view = synchronize(&rec.channels).unwrap();
    let frames = packetize_for_ui(&view, 25.0).unwrap();
    assert_eq!(frames.len(), 250);
    let seqs: Vec<u64> = frames.iter().map(|f| f.seq).collect();
    assert_eq!(seqs, (0..250).collect::<Vec<_>>());
    // Every raw sample lands in exactly one frame.
    for (kind, ch) in &view.channels {
        let total: usize = frames.iter().map(|f| f.snippets[kind].len()).sum();
        assert_eq!(total, ch.values.len(), "{kind:?}");
    }
    assert_eq!(packetize_for_ui(&view, 50.0).unwrap().len(), 500);
    assert!(packetize_for_ui(&view, 10.0).is_err());
}

#[test]
fn a_session_without_samples_yields_no_frames() {
    let rec = session(0.0);
    match synchronize(&rec.channels) {
        Ok(view) => assert!(packetize_for_ui(&view, 25.0).unwrap().is_empty()),
        Err(e) => assert!(e.to_string().contains("empty") || e.to_string().contains("no "), "{e}"),
    }
}

struct Publisher<'a> {
    hub: &'a TelemetryHub,
    published: u64,
}

impl TickObserver for Publisher<'_> {
    fn on_tick(&mut self, command: &AssistCommand, _: Option<&WindowFeatures>, _: f64) {
        if (command.tick_index + 1) % 4 == 0 {
            self.hub.publish(MessageKind::Frame, command);
            self.published += 1;
        }
    }
}

#[test]
fn stalled_consumer_loses_frames_but_the_loop_is_unchanged() {
    let cfg = RunConfig::default();
    let rec = session(60.0);
    let view = synchronize(&rec.channels).unwrap();
    let input = LoopInput::from_view(&view, cfg.assist.lookahead_s).unwrap();

    let mut quiet = controller_for(&cfg, &rec, 1.0).unwrap();
    let (cmds_a, stats_a) = run_loop(&input, &mut quiet, 60.0, &mut MonotonicClock::free_running(), None);

    let hub = TelemetryHub::new(8);
    let mut stalled = hub.subscribe();
    let mut observer = Publisher { hub: &hub, published: 0 };
    let mut busy = controller_for(&cfg, &rec, 1.0).unwrap();
    let (cmds_b, stats_b) = run_loop(
        &input,
        &mut busy,
        60.0,
        &mut MonotonicClock::free_running(),
        Some(&mut observer),
    );

    assert_eq!(cmds_a, cmds_b);
    assert_eq!(stats_a.ticks, stats_b.ticks);
    assert_eq!(stats_a.ticks, 6000);
    assert_eq!(stats_a.underruns, stats_b.underruns);
    assert_eq!(stats_b.missed_deadlines, 0);
    assert_eq!(observer.published, 1500);

    // The stalled client kept only the newest messages.
    let Err(TryRecvError::Lagged(lost)) = stalled.try_recv() else {
        panic!("expected a gap");
    };
    assert_eq!(lost, 1500 - 8);
    let kept: Vec<u64> = std::iter::from_fn(|| stalled.try_recv().ok())
        .map(|t| serde_json::from_str::<WireMessage>(&t).unwrap().seq)
        .collect();
    assert_eq!(kept, (1492..1500).collect::<Vec<_>>());
}

#[test]
fn clients_are_isolated_from_each_other() {
    let hub = TelemetryHub::new(4);
    let mut slow = hub.subscribe();
    let mut fast = hub.subscribe();
    let mut seen = BTreeMap::new();
    for i in 0..40u64 {
        hub.publish(MessageKind::Frame, &i);
        while let Ok(t) = fast.try_recv() {
            let m: WireMessage = serde_json::from_str(&t).unwrap();
            seen.insert(m.seq, m.payload);
        }
    }
    assert_eq!(seen.len(), 40);
    assert!(matches!(slow.try_recv(), Err(TryRecvError::Lagged(36))));
}
