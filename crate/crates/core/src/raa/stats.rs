use std::fmt;

use serde::Serialize;

use super::{RaaError, RaaSession};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SessionStats {
    pub average_score: f64,
    pub correct_count: u32,
    pub partial_count: u32,
    pub accumulated_score: f64,
}

pub fn session_stats(session: &RaaSession) -> Result<SessionStats, RaaError> {
    if session.is_empty() {
        return Err(RaaError::EmptySession);
    }
    Ok(SessionStats {
        average_score: session.accumulated_score / session.len() as f64,
        correct_count: session.correct_count,
        partial_count: session.partial_count,
        accumulated_score: session.accumulated_score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamStats {
    pub team_id: String,
    pub average_score: f64,
    pub correct_count: u32,
    pub partial_count: u32,
}

/// Per-team rows plus the overall row: the mean of team averages and the
/// column sums of the counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TeamReport {
    pub teams: Vec<TeamStats>,
    pub overall: TeamStats,
}

/// Builds the team table. Teams without utterances are left out; a report
/// with no utterances at all is an [`RaaError::EmptySession`].
pub fn team_report(teams: &[(String, Vec<RaaSession>)]) -> Result<TeamReport, RaaError> {
    let rows: Vec<TeamStats> = teams
        .iter()
        .filter_map(|(team_id, sessions)| {
            let n: usize = sessions.iter().map(RaaSession::len).sum();
            (n > 0).then(|| TeamStats {
                team_id: team_id.clone(),
                average_score: sessions.iter().map(|s| s.accumulated_score).sum::<f64>() / n as f64,
                correct_count: sessions.iter().map(|s| s.correct_count).sum(),
                partial_count: sessions.iter().map(|s| s.partial_count).sum(),
            })
        })
        .collect();
    if rows.is_empty() {
        return Err(RaaError::EmptySession);
    }
    let overall = TeamStats {
        team_id: "Avg".into(),
        average_score: rows.iter().map(|t| t.average_score).sum::<f64>() / rows.len() as f64,
        correct_count: rows.iter().map(|t| t.correct_count).sum(),
        partial_count: rows.iter().map(|t| t.partial_count).sum(),
    };
    Ok(TeamReport { teams: rows, overall })
}

impl fmt::Display for TeamReport {
    /// One `team<TAB>average / correct / partial` line per team, overall last.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "team\taverage / correct / partial")?;
        for t in self.teams.iter().chain(std::iter::once(&self.overall)) {
            writeln!(
                f,
                "{}\t{:.3} / {} / {}",
                t.team_id, t.average_score, t.correct_count, t.partial_count
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raa::{RaaConfig, Utterance};

    fn session(id: &str, scores: &[f64]) -> RaaSession {
        let cfg = RaaConfig::default();
        let mut s = RaaSession::new(id);
        for (i, &x) in scores.iter().enumerate() {
            s.step(
                &cfg,
                Utterance {
                    student_id: id.into(),
                    sentence_id: format!("q{i}"),
                    fuzzy_score: x,
                    timestamp_ms: i as u64,
                },
            )
            .unwrap();
        }
        s
    }

    #[test]
    fn two_utterance_session() {
        let st = session_stats(&session("a", &[0.6, 0.4])).unwrap();
        assert!((st.average_score - 0.5).abs() < 1e-15);
        assert_eq!((st.correct_count, st.partial_count), (1, 1));
        assert!((st.accumulated_score - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_perfect_score() {
        assert_eq!(session_stats(&session("a", &[1.0])).unwrap().average_score, 1.0);
    }

    #[test]
    fn empty_session_has_no_average() {
        assert_eq!(session_stats(&RaaSession::new("a")), Err(RaaError::EmptySession));
        assert_eq!(team_report(&[("T1".into(), vec![])]), Err(RaaError::EmptySession));
    }

    #[test]
    fn one_correct_six_partial() {
        // 0.6 plus six partial scores summing to 1.479
        let s = session("t5", &[0.6, 0.25, 0.25, 0.25, 0.25, 0.25, 0.229]);
        let st = session_stats(&s).unwrap();
        assert!((st.accumulated_score - 2.079).abs() < 1e-12);
        assert!((st.average_score - 0.297).abs() < 1e-12);
        assert_eq!((st.correct_count, st.partial_count), (1, 6));
    }

    #[test]
    fn single_team_single_utterance() {
        let r = team_report(&[("T1".into(), vec![session("a", &[0.8])])]).unwrap();
        assert_eq!(r.teams.len(), 1);
        assert_eq!(r.teams[0].average_score, 0.8);
        assert_eq!((r.teams[0].correct_count, r.teams[0].partial_count), (1, 0));
        assert_eq!(r.overall.average_score, 0.8);
    }

    #[test]
    fn overall_is_mean_of_team_averages() {
        let r = team_report(&[
            ("A".into(), vec![session("a", &[1.0, 1.0, 1.0])]),
            ("B".into(), vec![session("b", &[0.0])]),
        ])
        .unwrap();
        assert_eq!(r.overall.average_score, 0.5);
        assert_eq!(r.overall.correct_count, 3);
        assert_eq!(r.overall.partial_count, 1);
        assert!(r.to_string().ends_with("Avg\t0.500 / 3 / 1\n"));
    }
}
