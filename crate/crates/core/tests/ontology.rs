use std::collections::BTreeMap;

use triage_core::ontology::Ontology;
use triage_core::resources::Resources;
use triage_core::Error;

fn base() -> Ontology {
    Ontology::build(&[], &Resources::builtin()).unwrap()
}

fn id(o: &Ontology, dict: &str) -> String {
    o.resolve(dict, None).unwrap().to_string()
}

#[test]
fn phalanx_merges_into_finger() {
    let o = base();
    let (phalanx, finger) = (id(&o, "C_phalanx"), id(&o, "C_finger"));
    let (pp, fp) = (id(&o, "C_phalanx_pain"), id(&o, "C_finger_pain"));
    let before_pp = o.descendants(&pp).unwrap();
    let merge = BTreeMap::from([(phalanx.clone(), finger.clone()), (pp.clone(), fp.clone())]);
    let c = o.coarsen(&merge).unwrap();
    c.validate().unwrap();
    assert!(c.concept(&phalanx).is_none());
    let f = c.concept(&finger).unwrap();
    assert!(f.synonyms.contains("fingerglied") && f.synonyms.contains("finger"));
    assert_eq!(c.resolve("C_phalanx", None), Some(finger.as_str()));
    assert_eq!(c.resolve("C_phalanx_pain", None), Some(fp.as_str()));
    assert!(c.descendants(&fp).unwrap().is_superset(&before_pp));
}

#[test]
fn empty_merge_is_identity() {
    let o = base();
    assert_eq!(o.coarsen(&BTreeMap::new()).unwrap(), o);
}

#[test]
fn unknown_target_is_rejected() {
    let o = base();
    let merge = BTreeMap::from([(id(&o, "C_finger"), "K000000000000".to_string())]);
    assert!(matches!(o.coarsen(&merge), Err(Error::Lookup(_))));
}

#[test]
fn merge_that_closes_a_loop_is_rejected() {
    let o = base();
    // find a grandchild g -> p -> a and merge g into a, turning p -> a into a cycle
    let chain = o.concepts().find_map(|g| {
        o.parents(&g.id).find_map(|p| o.parents(p).next().map(|a| (g.id.clone(), a.to_string())))
    });
    let (g, a) = chain.expect("seed taxonomy has depth two");
    let merge = BTreeMap::from([(g, a)]);
    match o.coarsen(&merge) {
        Err(Error::Cycle { path }) => assert!(path.len() >= 2),
        other => panic!("expected a cycle, got {other:?}"),
    }
}

#[test]
fn merged_descendants_move_to_the_target() {
    let o = base();
    let (x, y) = o
        .concepts()
        .filter(|c| !o.descendants(&c.id).unwrap().is_empty())
        .find_map(|x| {
            let below = o.descendants(&x.id).unwrap();
            o.concepts()
                .find(|y| {
                    y.id != x.id
                        && !below.contains(&y.id)
                        && !o.descendants(&y.id).unwrap().contains(&x.id)
                        && o.parents(&x.id).all(|p| !o.descendants(&y.id).unwrap().contains(p) && p != y.id)
                })
                .map(|y| (x.id.clone(), y.id.clone()))
        })
        .expect("a mergeable pair");
    let before = o.descendants(&x).unwrap();
    let c = o.coarsen(&BTreeMap::from([(x, y.clone())])).unwrap();
    assert!(c.descendants(&y).unwrap().is_superset(&before));
}
