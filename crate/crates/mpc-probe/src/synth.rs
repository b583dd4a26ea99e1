//! Seeded synthetic MPC corpora: clean conversations that satisfy every
//! diagnostic predicate, plus controlled violation injection for filter
//! soundness checks and fully random conversations for graph oracles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{Conversation, Turn, UserId};

const VERBS: [&str; 8] = [
    "check", "restart", "mount", "update", "compile", "trace", "patch", "reinstall",
];
const NOUNS: [&str; 8] = [
    "the daemon", "the kernel", "the driver", "the partition", "the package", "the config",
    "the service", "the log",
];
const TAILS: [&str; 6] = [
    "before rebooting",
    "after the upgrade",
    "on the second disk",
    "with verbose output",
    "from a live session",
    "once more",
];

fn message(rng: &mut ChaCha8Rng, mention: Option<&str>) -> String {
    let verb = VERBS[rng.random_range(0..VERBS.len())];
    let noun = NOUNS[rng.random_range(0..NOUNS.len())];
    let tail = TAILS[rng.random_range(0..TAILS.len())];
    match mention {
        Some(name) => format!("{name} {verb} {noun} {tail}"),
        None => format!("{verb} {noun} {tail}"),
    }
}

fn uid(i: usize) -> UserId {
    UserId::new(format!("user{i:02}")).expect("generated ids are valid")
}

/// A conversation over `user_count` users that is connected, keeps its next
/// speaker in the context and has `turn_count` turns.
fn clean_conversation(rng: &mut ChaCha8Rng, id: &str, user_count: usize, turn_count: usize) -> Conversation {
    assert!(user_count >= 2);
    assert!(turn_count > user_count, "need room for chain plus final turn");
    let users: Vec<UserId> = (0..user_count).map(uid).collect();

    let mut turns: Vec<Turn> = Vec::with_capacity(turn_count);
    // Spanning chain: user k first appears by addressing one of the users
    // 0..k, which keeps the graph connected and fixes first appearances.
    for k in 1..user_count {
        let target = rng.random_range(0..k);
        let mention = if rng.random_range(0..5) == 0 {
            Some(users[target].as_str().to_owned())
        } else {
            None
        };
        turns.push(Turn {
            index: turns.len() + 1,
            speaker: users[k].clone(),
            addressee: users[target].clone(),
            text: message(rng, mention.as_deref()),
        });
    }
    // Random filler up to the context length.
    while turns.len() < turn_count - 1 {
        let s = rng.random_range(0..user_count);
        let mut a = rng.random_range(0..user_count);
        while a == s {
            a = rng.random_range(0..user_count);
        }
        turns.push(Turn {
            index: turns.len() + 1,
            speaker: users[s].clone(),
            addressee: users[a].clone(),
            text: message(rng, None),
        });
    }
    // Final turn: any speaker (all users already occur in the context).
    let s = rng.random_range(0..user_count);
    let mut a = rng.random_range(0..user_count);
    while a == s {
        a = rng.random_range(0..user_count);
    }
    turns.push(Turn {
        index: turns.len() + 1,
        speaker: users[s].clone(),
        addressee: users[a].clone(),
        text: message(rng, None),
    });

    Conversation::new(id, turns)
}

/// `n` clean conversations with exactly `user_count` users and lengths in
/// `[user_count + 2, 15]`. Every one passes the default diagnostic filter.
pub fn synthetic_corpus(seed: u64, n: usize, user_count: usize) -> Vec<Conversation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let turn_count = rng.random_range(user_count + 2..=15);
            clean_conversation(&mut rng, &format!("synth-{i:04}"), user_count, turn_count)
        })
        .collect()
}

/// Which diagnostic predicate a generated conversation is built to violate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InjectedViolation {
    UserCount,
    Length,
    Connectivity,
    NextSpeaker,
}

/// Corpus for filter soundness checks: roughly half the conversations are
/// clean, the rest each violate exactly the predicate they are labeled with
/// (relative to a filter expecting `user_count` users and length <= 15).
pub fn corpus_with_violations(
    seed: u64,
    n: usize,
    user_count: usize,
) -> Vec<(Conversation, Option<InjectedViolation>)> {
    assert!(user_count >= 3, "violation injection needs >= 3 users");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let id = format!("viol-{i:04}");
        let pick = rng.random_range(0..8);
        let entry = match pick {
            0 => {
                // Wrong user count: one user more or fewer.
                let count = if rng.random::<bool>() { user_count + 1 } else { user_count - 1 };
                let turn_count = rng.random_range(count + 2..=15);
                (
                    clean_conversation(&mut rng, &id, count, turn_count),
                    Some(InjectedViolation::UserCount),
                )
            }
            1 => {
                // Too long: 16..=18 turns.
                let turn_count = rng.random_range(16..=18);
                (
                    clean_conversation(&mut rng, &id, user_count, turn_count),
                    Some(InjectedViolation::Length),
                )
            }
            2 => {
                // Disconnected: a connected core plus one user who only
                // talks to themselves.
                let turn_count = rng.random_range(user_count + 2..=15);
                let mut conv = clean_conversation(&mut rng, &id, user_count - 1, turn_count - 2);
                let loner = uid(user_count - 1);
                let insert_at = conv.turns.len() - 1;
                let text = message(&mut rng, None);
                conv.turns.insert(
                    insert_at,
                    Turn {
                        index: 0,
                        speaker: loner.clone(),
                        addressee: loner.clone(),
                        text,
                    },
                );
                let text = message(&mut rng, None);
                conv.turns.insert(
                    insert_at + 1,
                    Turn {
                        index: 0,
                        speaker: loner.clone(),
                        addressee: loner,
                        text,
                    },
                );
                for (i, t) in conv.turns.iter_mut().enumerate() {
                    t.index = i + 1;
                }
                (
                    Conversation::new(id, conv.turns),
                    Some(InjectedViolation::Connectivity),
                )
            }
            3 => {
                // Next speaker only in the final turn: build the context
                // over user_count-1 users and reserve the last user.
                let turn_count = rng.random_range(user_count + 2..=15);
                let mut conv = clean_conversation(&mut rng, &id, user_count - 1, turn_count - 1);
                conv.turns.pop();
                let reserved = uid(user_count - 1);
                let addressee = uid(rng.random_range(0..user_count - 1));
                let text = message(&mut rng, None);
                conv.turns.push(Turn {
                    index: conv.turns.len() + 1,
                    speaker: reserved,
                    addressee,
                    text,
                });
                for (i, t) in conv.turns.iter_mut().enumerate() {
                    t.index = i + 1;
                }
                (
                    Conversation::new(id, conv.turns),
                    Some(InjectedViolation::NextSpeaker),
                )
            }
            _ => {
                let turn_count = rng.random_range(user_count + 2..=15);
                (
                    clean_conversation(&mut rng, &id, user_count, turn_count),
                    None,
                )
            }
        };
        out.push(entry);
    }
    out
}

/// Unconstrained random conversation for brute-force graph oracles:
/// up to `max_users` users, up to `max_turns` turns, self-addressed turns
/// allowed.
pub fn random_conversation(rng: &mut ChaCha8Rng, id: &str, max_users: usize, max_turns: usize) -> Conversation {
    let user_count = rng.random_range(1..=max_users);
    let turn_count = rng.random_range(2..=max_turns.max(2));
    let turns: Vec<Turn> = (0..turn_count)
        .map(|i| {
            let s = rng.random_range(0..user_count);
            let a = rng.random_range(0..user_count);
            Turn {
                index: i + 1,
                speaker: uid(s),
                addressee: uid(a),
                text: format!("m{i}"),
            }
        })
        .collect();
    Conversation::new(id, turns)
}
