use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rskill::ontology::{base_ontology, vocab, Iri};
use rskill::world_model::{NewElement, Pose, WmSnapshot, WorldModel};

use super::Outcome;

type Mat = [[f64; 4]; 4];

const ELEMENTS: usize = 16;
const MOVES: usize = 1000;
const TOL: f64 = 1e-9;

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let mut c = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            c[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn identity() -> Mat {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

fn homogeneous(p: [f64; 3], q: [f64; 4]) -> Mat {
    let [w, x, y, z] = q;
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y), p[0]],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x), p[1]],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y), p[2]],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Unit quaternion (w, x, y, z) of the rotation block.
fn quaternion(m: &Mat) -> [f64; 4] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let q = if tr > 0.0 {
        let s = (tr + 1.0).sqrt() * 2.0;
        [0.25 * s, (m[2][1] - m[1][2]) / s, (m[0][2] - m[2][0]) / s, (m[1][0] - m[0][1]) / s]
    } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
        let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
        [(m[2][1] - m[1][2]) / s, 0.25 * s, (m[0][1] + m[1][0]) / s, (m[0][2] + m[2][0]) / s]
    } else if m[1][1] > m[2][2] {
        let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
        [(m[0][2] - m[2][0]) / s, (m[0][1] + m[1][0]) / s, 0.25 * s, (m[1][2] + m[2][1]) / s]
    } else {
        let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
        [(m[1][0] - m[0][1]) / s, (m[0][2] + m[2][0]) / s, (m[1][2] + m[2][1]) / s, 0.25 * s]
    };
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    q.map(|v| v / n)
}

/// Relative pose from the raw literals; identity when unposed.
fn local(wm: &WmSnapshot, id: &Iri) -> Mat {
    let g = wm.graph();
    let vals: Vec<Option<f64>> = vocab::pose_properties()
        .iter()
        .map(|p| g.objects(id, p).next().and_then(|t| t.as_f64()))
        .collect();
    if vals.iter().any(Option::is_none) {
        return identity();
    }
    let v: Vec<f64> = vals.into_iter().flatten().collect();
    homogeneous([v[0], v[1], v[2]], [v[3], v[4], v[5], v[6]])
}

fn oracle_world(wm: &WmSnapshot, id: &Iri) -> Mat {
    let mut chain = vec![id.clone()];
    let mut cur = wm.parent(id);
    while let Some(p) = cur {
        cur = wm.parent(&p);
        chain.push(p);
    }
    chain.iter().rev().fold(identity(), |acc, e| mat_mul(&acc, &local(wm, e)))
}

fn quat_gap(a: [f64; 4], b: [f64; 4]) -> f64 {
    let direct = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let flipped = a.iter().zip(&b).map(|(x, y)| (x + y).abs()).fold(0.0, f64::max);
    direct.min(flipped)
}

fn gaps(a: &Mat, b: &Mat) -> (f64, f64) {
    let pos = (0..3).map(|i| (a[i][3] - b[i][3]).abs()).fold(0.0, f64::max);
    (pos, quat_gap(quaternion(a), quaternion(b)))
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    let pos = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-1.0..1.0)];
    let q = [
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    ];
    Pose::new(pos, q).unwrap()
}

pub fn criterion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut model = WorldModel::new(base_ontology()).map_err(|e| e.to_string())?;
    let root = vocab::scene_root();
    let mut ids: Vec<Iri> = Vec::new();
    for _ in 0..ELEMENTS {
        let parent = if ids.is_empty() || rng.gen_bool(0.3) {
            root.clone()
        } else {
            ids.choose(&mut rng).unwrap().clone()
        };
        let e = NewElement::of_type(vocab::location()).pose(random_pose(&mut rng)).parent(parent);
        ids.push(model.add_element(e).map_err(|e| e.to_string())?);
    }
    let initial: Vec<Mat> = {
        let s = model.snapshot();
        ids.iter().map(|i| oracle_world(&s, i)).collect()
    };
    let (mut worst_pos, mut worst_rot, mut worst_report) = (0.0f64, 0.0f64, 0.0f64);
    for step in 0..MOVES {
        let before = model.snapshot();
        let e = ids.choose(&mut rng).unwrap().clone();
        let options: Vec<Iri> = std::iter::once(root.clone())
            .chain(ids.iter().cloned())
            .filter(|p| *p != e && !before.ancestors(p).contains(&e))
            .collect();
        let p = options.choose(&mut rng).unwrap().clone();
        let worlds: Vec<Mat> = ids.iter().map(|i| oracle_world(&before, i)).collect();
        model.move_element(&e, &p).map_err(|err| format!("move {step}: {err}"))?;
        let after = model.snapshot();
        if after.parent(&e).as_ref() != Some(&p) {
            return Err(format!("move {step}: {e} did not end up under {p}"));
        }
        for (i, id) in ids.iter().enumerate() {
            let (dp, dq) = gaps(&worlds[i], &oracle_world(&after, id));
            worst_pos = worst_pos.max(dp);
            worst_rot = worst_rot.max(dq);
            let reported = after.world_pose(id).map_err(|err| err.to_string())?;
            let m = homogeneous(reported.position(), reported.orientation());
            let (rp, rq) = gaps(&oracle_world(&after, id), &m);
            worst_report = worst_report.max(rp.max(rq));
        }
        if worst_pos > TOL || worst_rot > TOL || worst_report > TOL {
            return Err(format!(
                "move {step}: position {worst_pos:.3e}, quaternion {worst_rot:.3e}, reported pose {worst_report:.3e}"
            ));
        }
    }
    let fin = model.snapshot();
    let (mut drift_p, mut drift_q) = (0.0f64, 0.0f64);
    for (i, id) in ids.iter().enumerate() {
        let (dp, dq) = gaps(&initial[i], &oracle_world(&fin, id));
        drift_p = drift_p.max(dp);
        drift_q = drift_q.max(dq);
    }
    if drift_p > TOL || drift_q > TOL {
        return Err(format!("cumulative drift position {drift_p:.3e}, quaternion {drift_q:.3e}"));
    }
    Ok(format!(
        "{MOVES} reparentings over {ELEMENTS} elements: max per-move deviation {worst_pos:.1e} m / {worst_rot:.1e}, cumulative {drift_p:.1e} m / {drift_q:.1e}"
    ))
}
