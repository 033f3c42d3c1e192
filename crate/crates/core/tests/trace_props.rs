mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use capweave_core::trace::{all_links, forward_requirements};
use capweave_core::{
    coupling, critical_traces, fixtures, impact_of_capability_change, impact_of_directive_change,
    impact_of_node_change, impact_of_requirement_change, trace_backward, trace_matrix, Direction, EntityRef,
    ImpactReport, Mutation, Project,
};
use common::{project_from_seed, Oracle};
use proptest::prelude::*;

fn round_trip_holds(p: &Project) -> Result<(), String> {
    for r in p.requirements().keys() {
        let back = trace_backward(p, r.as_str()).map_err(|e| e.to_string())?;
        if back.needs.is_empty() {
            return Err(format!("{r} has no need"));
        }
        for n in &back.needs {
            if !forward_requirements(p, n.as_str()).unwrap().contains(r) {
                return Err(format!("{r} not reached from {n}"));
            }
        }
    }
    Ok(())
}

fn antitone_holds(p: &Project) -> bool {
    let ts = [0.0, 0.3, 0.6, 0.85, 1.0];
    let sets: Vec<BTreeSet<_>> = ts.iter().map(|&t| critical_traces(p, t).unwrap().into_iter().collect()).collect();
    sets.windows(2).all(|w| w[1].is_subset(&w[0])) && sets[0].len() == all_links(p).len()
}

#[test]
fn r1_round_trip_and_thresholds() {
    let p = fixtures::r1_transformed(&["n1", "n7", "n3"], 2);
    assert_eq!(p.requirements().len(), 28);
    round_trip_holds(&p).unwrap();
    assert!(antitone_holds(&p));
}

/// Entity keys shared by the link graph and impact reports.
fn key(e: &EntityRef) -> String {
    match e {
        EntityRef::Need(id) => format!("need:{id}"),
        EntityRef::Requirement(id) => format!("req:{id}"),
        other => other.id().to_string(),
    }
}

/// Undirected adjacency over every recorded link, built from raw project data.
fn link_graph(p: &Project) -> BTreeMap<String, BTreeSet<String>> {
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut link = |a: String, b: String| {
        adj.entry(a.clone()).or_default().insert(b.clone());
        adj.entry(b).or_default().insert(a);
    };
    for n in p.graph().nodes() {
        for need in &n.need_refs {
            link(format!("need:{need}"), n.id.to_string());
        }
    }
    for e in p.graph().edges() {
        link(e.source.to_string(), e.target.to_string());
    }
    if let Some(sel) = p.selection() {
        for (m, ds) in &sel.chosen_set.assignment {
            for d in ds {
                link(m.to_string(), d.to_string());
            }
        }
    }
    for r in p.requirements().values() {
        link(r.source_directive_id.to_string(), format!("req:{}", r.id));
        link(r.capability_id.to_string(), format!("req:{}", r.id));
    }
    adj
}

fn reachable(adj: &BTreeMap<String, BTreeSet<String>>, from: &str) -> BTreeSet<String> {
    let mut seen = BTreeSet::from([from.to_string()]);
    let mut queue = VecDeque::from([from.to_string()]);
    while let Some(v) = queue.pop_front() {
        for w in adj.get(&v).into_iter().flatten() {
            if seen.insert(w.clone()) {
                queue.push_back(w.clone());
            }
        }
    }
    seen
}

fn report_reachable(adj: &BTreeMap<String, BTreeSet<String>>, r: &ImpactReport) -> bool {
    let seen = reachable(adj, &key(&r.trigger));
    r.entities().iter().all(|e| seen.contains(&key(e)))
        && [&r.affected_nodes, &r.affected_directives, &r.affected_capabilities, &r.affected_requirements]
            .iter()
            .flat_map(|v| v.iter())
            .all(|i| (0.0..=1.0).contains(&i.weight))
}

/// Complete forward paths counted directly from raw data.
fn brute_force_rows(p: &Project) -> usize {
    let o = Oracle::new(p.graph());
    let mut rows = BTreeSet::new();
    for n in p.graph().nodes() {
        for need in &n.need_refs {
            for d in o.directive_set(n.id.as_str()) {
                for r in p.requirements().values().filter(|r| r.source_directive_id.as_str() == d) {
                    let owners: Vec<String> = p
                        .selection()
                        .map(|s| {
                            s.chosen_set
                                .assignment
                                .iter()
                                .filter(|(_, ds)| ds.iter().any(|x| x.as_str() == d))
                                .map(|(m, _)| m.to_string())
                                .collect()
                        })
                        .unwrap_or_default();
                    let caps = if owners.is_empty() { vec![r.capability_id.to_string()] } else { owners };
                    for c in caps {
                        rows.insert((need.to_string(), n.id.to_string(), d.clone(), c, r.id.to_string()));
                    }
                }
            }
        }
    }
    rows.len()
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(96) })]

    #[test]
    fn trace_round_trip(seed in any::<u64>()) {
        let p = project_from_seed(seed, 8);
        prop_assert_eq!(round_trip_holds(&p), Ok(()));
        for r in p.requirements().values() {
            let b = trace_backward(&p, r.id.as_str()).unwrap();
            prop_assert_eq!(&b.source_directive, &r.source_directive_id);
        }
    }

    #[test]
    fn critical_traces_antitone(seed in any::<u64>()) {
        let p = project_from_seed(seed, 8);
        prop_assert!(antitone_holds(&p));
    }

    #[test]
    fn impact_entities_are_reachable(seed in any::<u64>()) {
        let p = project_from_seed(seed, 8);
        let adj = link_graph(&p);
        for n in p.graph().nodes() {
            for dir in [Direction::Down, Direction::Up, Direction::Both] {
                let r = impact_of_node_change(&p, n.id.as_str(), dir).unwrap();
                prop_assert!(report_reachable(&adj, &r), "{} {:?}", n.id, dir);
            }
        }
        for d in p.graph().directive_ids() {
            prop_assert!(report_reachable(&adj, &impact_of_directive_change(&p, d.as_str()).unwrap()));
        }
        if let Some(sel) = p.selection() {
            for m in &sel.chosen_set.members {
                prop_assert!(report_reachable(&adj, &impact_of_capability_change(&p, m.as_str()).unwrap()));
            }
        }
        for r in p.requirements().keys() {
            prop_assert!(report_reachable(&adj, &impact_of_requirement_change(&p, r.as_str()).unwrap()));
        }
    }

    #[test]
    fn requirement_impact_is_local_without_coupling(seed in any::<u64>()) {
        let p = project_from_seed(seed, 8);
        let Some(sel) = p.selection() else { return Ok(()) };
        let members: Vec<_> = sel.chosen_set.members.iter().collect();
        let uncoupled = members.iter().enumerate().all(|(i, a)| {
            members[i + 1..].iter().all(|b| coupling(p.graph(), a.as_str(), b.as_str()).unwrap() == 0.0)
        });
        if !uncoupled {
            return Ok(());
        }
        let owner = |d: &str| sel.owners_of(d).next().cloned();
        for r in p.requirements().values() {
            let mine = owner(r.source_directive_id.as_str());
            let report = impact_of_requirement_change(&p, r.id.as_str()).unwrap();
            for other in report.requirement_ids() {
                let o = &p.requirements()[other];
                prop_assert_eq!(owner(o.source_directive_id.as_str()), mine.clone());
            }
        }
    }

    #[test]
    fn matrix_matches_brute_force(seed in any::<u64>()) {
        let p = project_from_seed(seed, 3);
        prop_assume!(p.graph().nodes().len() <= 12);
        prop_assert_eq!(trace_matrix(&p).len(), brute_force_rows(&p));
    }

    #[test]
    fn transformation_leaves_graph_and_membership(seed in any::<u64>()) {
        let p = project_from_seed(seed, 8);
        let Some(sel) = p.selection() else { return Ok(()) };
        for (m, owned) in &sel.chosen_set.assignment {
            if !sel.is_feasible(m.as_str()) {
                continue;
            }
            let drafts = owned.iter().map(|d| (d.clone(), vec!["extra statement".to_string()])).collect();
            let next = p.apply(Mutation::Transform { capability: m.clone(), drafts }).unwrap();
            prop_assert_eq!(next.graph(), p.graph());
            prop_assert_eq!(next.selection(), p.selection());
            prop_assert_eq!(next.requirements().len(), p.requirements().len() + owned.len());
            let mut by_directive: BTreeMap<_, Vec<_>> = BTreeMap::new();
            for r in next.requirements().values() {
                by_directive.entry(r.source_directive_id.clone()).or_default().push(r.id.clone());
            }
            for d in owned {
                prop_assert!(!by_directive[d].is_empty());
            }
        }
    }
}

#[test]
fn matrix_rows_for_r1() {
    let p = fixtures::r1_transformed(&["n1", "n7", "n3"], 1);
    assert_eq!(trace_matrix(&p).len(), 14);
    assert_eq!(brute_force_rows(&p), 14);
    let p = fixtures::r2_selected(&["n1", "n7", "n3"]);
    let p = fixtures::transform_all(p, 1);
    // d9 is owned by n7 and n3 and yields one row per owner.
    assert_eq!(trace_matrix(&p).len(), 15);
    assert_eq!(brute_force_rows(&p), 15);
}
