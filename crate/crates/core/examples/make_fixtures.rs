//! Regenerates the fixture corpus under `fixtures/`.
//!
//! `cargo run -p cabinet-core --example make_fixtures -- <fixtures dir>`

use std::fs;
use std::path::{Path, PathBuf};

use cabinet_core::io::{tally_results, write_ballots, write_election, write_upload};
use cabinet_core::model::{
    validate_election, validate_profile, BallotDraft, CandidateDraft, ElectionDraft, OfficeDraft,
};
use cabinet_core::sim::{generate_profile, two_bloc_spec, Bloc, BlocSpec};
use cabinet_core::{plurality_baseline, ApprovalProfile, Election};

const MINISTRIES: [&str; 12] = [
    "health",
    "education",
    "finance",
    "defense",
    "foreign_affairs",
    "interior",
    "justice",
    "economy",
    "transport",
    "welfare",
    "environment",
    "culture",
];

fn office(id: &str, name: &str, candidates: &[(&str, &str)]) -> OfficeDraft {
    OfficeDraft {
        id: id.into(),
        name: name.into(),
        candidates: candidates
            .iter()
            .map(|(id, name)| CandidateDraft {
                id: (*id).into(),
                name: (*name).into(),
            })
            .collect(),
    }
}

fn title(id: &str) -> String {
    let words: Vec<String> = id
        .split('_')
        .map(|w| {
            let mut cs = w.chars();
            cs.next()
                .map(|c| c.to_uppercase().chain(cs).collect())
                .unwrap_or_default()
        })
        .collect();
    format!("Ministry of {}", words.join(" "))
}

fn write(dir: &Path, name: &str, bytes: &[u8]) {
    fs::create_dir_all(dir).unwrap();
    fs::write(dir.join(name), bytes).unwrap();
}

fn write_pair(dir: &Path, election: &Election, profile: &ApprovalProfile) {
    write(dir, "election.json", &write_election(election));
    write(dir, "ballots.csv", &write_ballots(election, profile));
}

fn bloc_election(k: usize, name: &str) -> Election {
    validate_election(&ElectionDraft {
        name: name.into(),
        offices: (1..=k)
            .map(|o| {
                office(
                    &format!("o{o}"),
                    &format!("Office {o}"),
                    &[
                        (&format!("M{o}"), &format!("Majority nominee {o}")),
                        (&format!("m{o}"), &format!("Minority nominee {o}")),
                    ],
                )
            })
            .collect(),
    })
    .unwrap()
}

fn main() {
    let root: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fixtures".into())
        .into();

    // Two offices, two blocs of two voters.
    let four = validate_election(&ElectionDraft {
        name: "Four voters".into(),
        offices: vec![
            office(
                "o1",
                "Office 1",
                &[("A1", "Candidate A1"), ("B1", "Candidate B1")],
            ),
            office(
                "o2",
                "Office 2",
                &[("A2", "Candidate A2"), ("B2", "Candidate B2")],
            ),
        ],
    })
    .unwrap();
    let line = |v: &str, a: &str, b: &str| BallotDraft {
        voter_id: v.into(),
        approvals: [
            ("o1".to_string(), vec![a.to_string()]),
            ("o2".to_string(), vec![b.to_string()]),
        ]
        .into(),
    };
    let four_profile = validate_profile(
        &four,
        &[
            line("v1", "A1", "A2"),
            line("v2", "A1", "A2"),
            line("v3", "B1", "B2"),
            line("v4", "B1", "B2"),
        ],
    )
    .unwrap();
    let dir = root.join("four_voter");
    write_pair(&dir, &four, &four_profile);
    write(&dir, "upload.json", &write_upload(&four, &four_profile));
    write(
        &dir,
        "results.json",
        &tally_results(&four, &four_profile).unwrap(),
    );

    // One office.
    let trivial = validate_election(&ElectionDraft {
        name: "Single office".into(),
        offices: vec![office(
            "health",
            "Ministry of Health",
            &[("a", "Candidate A"), ("b", "Candidate B")],
        )],
    })
    .unwrap();
    let trivial_profile = validate_profile(
        &trivial,
        &[
            BallotDraft {
                voter_id: "v1".into(),
                approvals: [("health".to_string(), vec!["a".to_string()])].into(),
            },
            BallotDraft {
                voter_id: "v2".into(),
                approvals: [("health".to_string(), vec!["a".to_string()])].into(),
            },
        ],
    )
    .unwrap();
    write_pair(&root.join("trivial_k1"), &trivial, &trivial_profile);

    // 75/25 disjoint blocs over four offices.
    let blocs = bloc_election(4, "Majority and minority");
    let spec = two_bloc_spec(&blocs, 75, 25);
    let profile = generate_profile(&blocs, &spec).unwrap();
    let dir = root.join("bloc_75_25");
    write_pair(&dir, &blocs, &profile);
    write(&dir, "spec.json", &pretty(&vec![spec]));
    let plurality = plurality_baseline(&blocs, &profile).unwrap();
    write(&dir, "plurality_committee.json", &pretty(&plurality.assignment()));

    // Minority-fraction sweep at K = 10.
    let sweep = bloc_election(10, "Minority sweep");
    let specs: Vec<BlocSpec> = [(90, 10), (75, 25), (60, 40)]
        .into_iter()
        .map(|(maj, min)| two_bloc_spec(&sweep, maj, min))
        .collect();
    let dir = root.join("sweep_k10");
    write(&dir, "election.json", &write_election(&sweep));
    write(&dir, "spec.json", &pretty(&specs));

    // Twelve ministries, four candidates each, 500 single-choice voters.
    let survey = validate_election(&ElectionDraft {
        name: "Twelve ministries".into(),
        offices: MINISTRIES
            .iter()
            .map(|m| {
                let ids: Vec<(String, String)> = (1..=4)
                    .map(|c| (format!("{m}-{c}"), format!("{} candidate {c}", title(m))))
                    .collect();
                let refs: Vec<(&str, &str)> = ids.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
                office(m, &title(m), &refs)
            })
            .collect(),
    })
    .unwrap();
    let party = |label: &str, voters: usize, position: usize| Bloc {
        label: label.into(),
        voter_count: voters,
        approved: survey
            .offices()
            .iter()
            .map(|o| (o.id.to_string(), vec![o.candidates[position].id.to_string()]))
            .collect(),
    };
    let survey_spec = BlocSpec {
        name: Some("survey".into()),
        blocs: vec![
            party("p1", 200, 0),
            party("p2", 150, 1),
            party("p3", 100, 2),
            party("p4", 50, 3),
        ],
        seed: 2022,
        defection_rate: 0.2,
    };
    let survey_profile = generate_profile(&survey, &survey_spec).unwrap();
    let dir = root.join("survey_12x4");
    write_pair(&dir, &survey, &survey_profile);
    write(&dir, "upload.json", &write_upload(&survey, &survey_profile));
}

fn pretty<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).unwrap();
    out.push(b'\n');
    out
}
