//! Static trajectory figures: CSV polylines plus an SVG overlay.

use std::fmt::Write as _;

use crate::arena::{ArenaConfig, Weapon, NUM_WHITES};
use crate::rollout::TrajectoryLog;

/// Stroke colors of the first and second policy.
pub const COLORS: [&str; 2] = ["#e6b800", "#d62728"];

const SCALE: f64 = 10.0;
const MARGIN: f64 = 20.0;

pub struct PlotSeries<'a> {
    pub policy: &'a str,
    pub log: &'a TrajectoryLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackMarker {
    pub agent: usize,
    pub tick: u32,
    pub pos: [f64; 2],
    pub weapon: Weapon,
}

/// Attacks made by the white agents, placed at the shooter's position that tick.
pub fn attack_markers(log: &TrajectoryLog) -> Vec<AttackMarker> {
    let mut out = Vec::new();
    for r in &log.records {
        for e in &r.events {
            if e.shooter < NUM_WHITES {
                out.push(AttackMarker {
                    agent: e.shooter,
                    tick: r.tick,
                    pos: r.positions[e.shooter],
                    weapon: e.weapon,
                });
            }
        }
    }
    out
}

fn weapon_name(w: Weapon) -> &'static str {
    match w {
        Weapon::Gun => "gun",
        Weapon::Bomb => "bomb",
        Weapon::RedGun => "red_gun",
    }
}

pub fn csv(series: &[PlotSeries<'_>]) -> String {
    let mut s = String::from("series,policy,agent,tick,x,y,weapon\n");
    for p in series {
        for k in 0..NUM_WHITES {
            for (tick, pos) in p.log.agent_path(k).iter().enumerate() {
                writeln!(
                    s,
                    "path,{},{},{},{},{},",
                    p.policy,
                    k + 1,
                    tick,
                    pos[0],
                    pos[1]
                )
                .unwrap();
            }
        }
        for m in attack_markers(p.log) {
            writeln!(
                s,
                "attack,{},{},{},{},{},{}",
                p.policy,
                m.agent + 1,
                m.tick,
                m.pos[0],
                m.pos[1],
                weapon_name(m.weapon)
            )
            .unwrap();
        }
    }
    s
}

fn px(arena: &ArenaConfig, pos: [f64; 2]) -> (f64, f64) {
    (
        MARGIN + pos[0] * SCALE,
        MARGIN + (arena.arena_size_m - pos[1]) * SCALE,
    )
}

/// SVG overlay, north up. Agent 1 is drawn solid, agent 2 dotted; attacks
/// are dashed circles in the policy's color.
pub fn svg(arena: &ArenaConfig, series: &[PlotSeries<'_>]) -> String {
    let side = arena.arena_size_m * SCALE + 2.0 * MARGIN;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{side:.0}" height="{side:.0}" viewBox="0 0 {side:.0} {side:.0}">"#
    )
    .unwrap();
    writeln!(
        s,
        r##"<rect x="{MARGIN:.0}" y="{MARGIN:.0}" width="{w:.0}" height="{w:.0}" fill="#fafafa" stroke="#444"/>"##,
        w = arena.arena_size_m * SCALE
    )
    .unwrap();
    let (cx, cy) = px(arena, arena.center());
    writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="12" height="12" fill="#b00000"/>"##,
        cx - 6.0,
        cy - 6.0
    )
    .unwrap();
    for (i, p) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        writeln!(s, r#"<g id="{}" stroke="{color}" fill="none">"#, p.policy).unwrap();
        for k in 0..NUM_WHITES {
            let pts: Vec<String> = p
                .log
                .agent_path(k)
                .iter()
                .map(|&q| {
                    let (x, y) = px(arena, q);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let dash = if k == 0 {
                ""
            } else {
                r#" stroke-dasharray="2 3""#
            };
            writeln!(
                s,
                r#"<polyline data-agent="{}" stroke-width="2"{dash} points="{}"/>"#,
                k + 1,
                pts.join(" ")
            )
            .unwrap();
        }
        for m in attack_markers(p.log) {
            let (x, y) = px(arena, m.pos);
            writeln!(
                s,
                r#"<circle data-agent="{}" data-tick="{}" data-weapon="{}" cx="{x:.2}" cy="{y:.2}" r="6" stroke-dasharray="3 2"/>"#,
                m.agent + 1,
                m.tick,
                weapon_name(m.weapon)
            )
            .unwrap();
        }
        writeln!(s, "</g>").unwrap();
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::{AttackEvent, Outcome};
    use crate::rollout::TickRecord;

    fn log_with_gun_events(n: usize) -> TrajectoryLog {
        let records = (0..5u32)
            .map(|t| TickRecord {
                tick: t + 1,
                positions: [[1.0 + t as f64, 1.0], [39.0, 39.0 - t as f64]],
                actions: [5, 0],
                red_heading_deg: 0.0,
                red_hp: 8,
                reward: 0.0,
                events: if (t as usize) < n {
                    vec![
                        AttackEvent {
                            shooter: 0,
                            target: 2,
                            weapon: Weapon::Gun,
                            damage: 1,
                        },
                        AttackEvent {
                            shooter: 2,
                            target: 0,
                            weapon: Weapon::RedGun,
                            damage: 1,
                        },
                    ]
                } else {
                    vec![]
                },
            })
            .collect();
        TrajectoryLog {
            seed: 1,
            start: [[1.0, 1.0], [39.0, 39.0]],
            records,
            outcome: Outcome::Timeout,
        }
    }

    #[test]
    fn csv_keeps_every_white_attack() {
        let log = log_with_gun_events(3);
        let text = csv(&[PlotSeries {
            policy: "a",
            log: &log,
        }]);
        assert_eq!(text.lines().filter(|l| l.starts_with("attack,")).count(), 3);
        assert_eq!(
            text.lines().filter(|l| l.starts_with("path,")).count(),
            2 * 6
        );
    }

    #[test]
    fn identical_policies_draw_coincident_paths() {
        let log = log_with_gun_events(1);
        let cfg = ArenaConfig::default();
        let out = svg(
            &cfg,
            &[
                PlotSeries {
                    policy: "a",
                    log: &log,
                },
                PlotSeries {
                    policy: "b",
                    log: &log,
                },
            ],
        );
        let lines: Vec<&str> = out.lines().filter(|l| l.contains("<polyline")).collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], lines[2]);
        assert_eq!(lines[1], lines[3]);
        assert_eq!(
            out,
            svg(
                &cfg,
                &[
                    PlotSeries {
                        policy: "a",
                        log: &log
                    },
                    PlotSeries {
                        policy: "b",
                        log: &log
                    }
                ]
            )
        );
    }
}
