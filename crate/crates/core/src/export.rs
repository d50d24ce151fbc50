//! Motion serialization: the JSON clip document used across the toolchain,
//! and a BVH writer for viewing output in standard animation tools.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionClip, Pose};
use crate::skeleton::Skeleton;

/// On-disk form of a motion clip.
///
/// `frames[t][j]` is the xyz position of joint `j` (in `joint_names` order)
/// at frame `t`. `keyframes` may be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionDocument {
    pub fps: f64,
    pub joint_names: Vec<String>,
    pub frames: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    pub keyframes: Vec<usize>,
}

impl MotionDocument {
    pub fn from_clip(clip: &MotionClip, joint_names: &[String]) -> MotionDocument {
        assert_eq!(
            clip.joint_count(),
            joint_names.len(),
            "clip joint count must match the name list"
        );
        MotionDocument {
            fps: clip.fps(),
            joint_names: joint_names.to_vec(),
            frames: clip.frames().iter().map(|p| p.joints().to_vec()).collect(),
            keyframes: clip.keyframes().map(|k| k.to_vec()).unwrap_or_default(),
        }
    }

    pub fn into_clip(self) -> Result<MotionClip> {
        let width = self.joint_names.len();
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != width {
                return Err(Error::invalid(format!(
                    "frame {t} has {} joints, joint_names lists {width}",
                    frame.len()
                )));
            }
        }
        let frames = self
            .frames
            .into_iter()
            .map(Pose::new)
            .collect::<Result<Vec<_>>>()?;
        let keyframes = if self.keyframes.is_empty() { None } else { Some(self.keyframes) };
        MotionClip::with_keyframes(frames, self.fps, keyframes)
    }
}

/// Writes a clip as a compact one-line JSON document.
pub fn save_motion_json(path: &Path, clip: &MotionClip, skeleton: &Skeleton) -> Result<()> {
    if clip.joint_count() != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch(format!(
            "clip has {} joints, skeleton has {}",
            clip.joint_count(),
            skeleton.joint_count()
        )));
    }
    let mut body = serde_json::to_string(&MotionDocument::from_clip(clip, skeleton.joint_names()))?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

/// Reads a clip document, returning the clip and its joint names.
pub fn load_motion_json(path: &Path) -> Result<(MotionClip, Vec<String>)> {
    let doc: MotionDocument = serde_json::from_str(&std::fs::read_to_string(path)?)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    let names = doc.joint_names.clone();
    Ok((doc.into_clip()?, names))
}

// ── BVH ──────────────────────────────────────────────────────────────────────
//
// The clip stores raw joint positions; BVH wants a fixed skeleton driven by
// rotations. The writer freezes each bone at its mean length over the clip and
// recovers rotations by aiming each bone at the recorded child position:
// shoulders aim their elbow, elbows aim their wrist. This is exact for motion
// that keeps bone lengths constant and a least-surprise approximation
// otherwise. Head and shoulder offsets are fixed, so motion of those joints
// relative to the neck is not represented; the neck itself becomes the
// translating root.

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

/// Renders the clip as BVH text. The skeleton must contain the full canonical
/// joint set (head and elbows included).
pub fn write_bvh(clip: &MotionClip, skeleton: &Skeleton) -> Result<String> {
    if clip.joint_count() != skeleton.joint_count() {
        return Err(Error::SkeletonMismatch(format!(
            "clip has {} joints, skeleton has {}",
            clip.joint_count(),
            skeleton.joint_count()
        )));
    }
    let need = |name: &str| -> Result<usize> {
        skeleton
            .index_of(name)
            .ok_or_else(|| Error::SkeletonMismatch(format!("bvh export needs joint {name:?}")))
    };
    let neck = need("neck")?;
    let head = need("head")?;
    let r_sh = need("r_shoulder")?;
    let r_el = need("r_elbow")?;
    let r_wr = need("r_wrist")?;
    let l_sh = need("l_shoulder")?;
    let l_el = need("l_elbow")?;
    let l_wr = need("l_wrist")?;

    let frames = clip.frames();
    let off_head = mean_bone_offset(frames, neck, head)?;
    let off_r_sh = mean_bone_offset(frames, neck, r_sh)?;
    let off_r_el = mean_bone_offset(frames, r_sh, r_el)?;
    let off_r_wr = mean_bone_offset(frames, r_el, r_wr)?;
    let off_l_sh = mean_bone_offset(frames, neck, l_sh)?;
    let off_l_el = mean_bone_offset(frames, l_sh, l_el)?;
    let off_l_wr = mean_bone_offset(frames, l_el, l_wr)?;

    let mut out = String::new();
    out.push_str("HIERARCHY\n");
    out.push_str("ROOT neck\n{\n");
    out.push_str("    OFFSET 0.000000 0.000000 0.000000\n");
    out.push_str("    CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n");
    push_leaf_joint(&mut out, 1, "head", off_head, scale(off_head, 0.3));
    push_arm(&mut out, "r_shoulder", "r_elbow", off_r_sh, off_r_el, off_r_wr);
    push_arm(&mut out, "l_shoulder", "l_elbow", off_l_sh, off_l_el, off_l_wr);
    out.push_str("}\n");

    out.push_str("MOTION\n");
    out.push_str(&format!("Frames: {}\n", clip.frame_count()));
    out.push_str(&format!("Frame Time: {:.6}\n", 1.0 / clip.fps()));

    for pose in frames {
        let j = pose.joints();
        let mut values: Vec<f64> = Vec::with_capacity(21);
        values.extend_from_slice(&j[neck]);
        values.extend_from_slice(&[0.0, 0.0, 0.0]); // root rotation
        values.extend_from_slice(&[0.0, 0.0, 0.0]); // head rotation
        let (sz, sx, sy, ez, ex, ey) =
            arm_angles(j[neck], j[r_el], j[r_wr], off_r_sh, off_r_el, off_r_wr);
        values.extend_from_slice(&[sz, sx, sy, ez, ex, ey]);
        let (sz, sx, sy, ez, ex, ey) =
            arm_angles(j[neck], j[l_el], j[l_wr], off_l_sh, off_l_el, off_l_wr);
        values.extend_from_slice(&[sz, sx, sy, ez, ex, ey]);

        let line: Vec<String> = values.iter().map(|v| format!("{v:.6}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn save_bvh(path: &Path, clip: &MotionClip, skeleton: &Skeleton) -> Result<()> {
    std::fs::write(path, write_bvh(clip, skeleton)?)?;
    Ok(())
}

fn push_leaf_joint(out: &mut String, depth: usize, name: &str, offset: Vec3, end: Vec3) {
    let pad = "    ".repeat(depth);
    out.push_str(&format!("{pad}JOINT {name}\n{pad}{{\n"));
    out.push_str(&format!("{pad}    OFFSET {}\n", fmt3(offset)));
    out.push_str(&format!("{pad}    CHANNELS 3 Zrotation Xrotation Yrotation\n"));
    out.push_str(&format!("{pad}    End Site\n{pad}    {{\n"));
    out.push_str(&format!("{pad}        OFFSET {}\n", fmt3(end)));
    out.push_str(&format!("{pad}    }}\n"));
    out.push_str(&format!("{pad}}}\n"));
}

fn push_arm(out: &mut String, shoulder: &str, elbow: &str, off_sh: Vec3, off_el: Vec3, off_wr: Vec3) {
    let pad = "    ";
    out.push_str(&format!("{pad}JOINT {shoulder}\n{pad}{{\n"));
    out.push_str(&format!("{pad}    OFFSET {}\n", fmt3(off_sh)));
    out.push_str(&format!("{pad}    CHANNELS 3 Zrotation Xrotation Yrotation\n"));
    push_leaf_joint(out, 2, elbow, off_el, off_wr);
    out.push_str(&format!("{pad}}}\n"));
}

fn fmt3(v: Vec3) -> String {
    format!("{:.6} {:.6} {:.6}", v[0], v[1], v[2])
}

/// Shoulder and elbow ZXY angles (degrees) that aim the fixed-length bones at
/// the recorded elbow and wrist positions.
fn arm_angles(
    neck_pos: Vec3,
    elbow_pos: Vec3,
    wrist_pos: Vec3,
    off_sh: Vec3,
    off_el: Vec3,
    off_wr: Vec3,
) -> (f64, f64, f64, f64, f64, f64) {
    let sh_fk = add(neck_pos, off_sh);
    let to_elbow = sub(elbow_pos, sh_fk);
    let r_s = aim(off_el, to_elbow);
    let el_fk = add(sh_fk, mat_vec(&r_s, off_el));
    // Express the wrist target in the shoulder's rotated frame before aiming
    // the forearm.
    let local_target = mat_vec(&transpose(&r_s), sub(wrist_pos, el_fk));
    let r_e = aim(off_wr, local_target);
    let (sz, sx, sy) = euler_zxy_degrees(&r_s);
    let (ez, ex, ey) = euler_zxy_degrees(&r_e);
    (sz, sx, sy, ez, ex, ey)
}

/// Rotation taking direction `from` to direction `to`; identity when either
/// is degenerate.
fn aim(from: Vec3, to: Vec3) -> Mat3 {
    let nf = norm(from);
    let nt = norm(to);
    if nf < 1e-9 || nt < 1e-9 {
        return identity();
    }
    rotation_from_to(scale(from, 1.0 / nf), scale(to, 1.0 / nt))
}

/// Rodrigues rotation mapping unit vector `a` onto unit vector `b`.
fn rotation_from_to(a: Vec3, b: Vec3) -> Mat3 {
    let d = dot(a, b);
    if d > 1.0 - 1e-12 {
        return identity();
    }
    if d < -1.0 + 1e-12 {
        // Opposite directions: rotate half a turn about any axis normal to a.
        let helper = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        let axis = normalize(cross(a, helper));
        let mut r = identity();
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = 2.0 * axis[i] * axis[j] - if i == j { 1.0 } else { 0.0 };
            }
        }
        return r;
    }
    let c = cross(a, b);
    let k = 1.0 / (1.0 + d);
    [
        [d + k * c[0] * c[0], k * c[0] * c[1] - c[2], k * c[0] * c[2] + c[1]],
        [k * c[1] * c[0] + c[2], d + k * c[1] * c[1], k * c[1] * c[2] - c[0]],
        [k * c[2] * c[0] - c[1], k * c[2] * c[1] + c[0], d + k * c[2] * c[2]],
    ]
}

/// Decomposes `r` as Rz * Rx * Ry (the BVH channel order used here) and
/// returns the three angles in degrees.
fn euler_zxy_degrees(r: &Mat3) -> (f64, f64, f64) {
    let sx = r[2][1].clamp(-1.0, 1.0);
    let x = sx.asin();
    if sx.abs() < 1.0 - 1e-9 {
        let y = (-r[2][0]).atan2(r[2][2]);
        let z = (-r[0][1]).atan2(r[1][1]);
        (z.to_degrees(), x.to_degrees(), y.to_degrees())
    } else {
        // Gimbal lock: x is +/-90 degrees, split the remaining turn into z.
        let z = r[1][0].atan2(r[0][0]);
        (z.to_degrees(), x.to_degrees(), 0.0)
    }
}

/// Fixed bone offset: the mean bone direction scaled to the mean bone length.
///
/// Keeping the mean length (rather than the mean vector, which shortens under
/// averaging of rotating directions) makes the export exact for rigid motion.
fn mean_bone_offset(frames: &[Pose], parent: usize, child: usize) -> Result<Vec3> {
    let mut dir_sum = [0.0; 3];
    let mut len_sum = 0.0;
    for pose in frames {
        let v = sub(pose.joints()[child], pose.joints()[parent]);
        dir_sum = add(dir_sum, v);
        len_sum += norm(v);
    }
    let mean_len = len_sum / frames.len() as f64;
    if mean_len < 1e-9 {
        return Err(Error::invalid(format!(
            "bone between joints {parent} and {child} is degenerate (zero length)"
        )));
    }
    let dir = if norm(dir_sum) > 1e-9 {
        normalize(dir_sum)
    } else {
        // Directions cancelled out over the clip; fall back to the first frame.
        let first = sub(frames[0].joints()[child], frames[0].joints()[parent]);
        if norm(first) < 1e-9 {
            return Err(Error::invalid(format!(
                "bone between joints {parent} and {child} has no usable direction"
            )));
        }
        normalize(first)
    };
    Ok(scale(dir, mean_len))
}

fn identity() -> Mat3 {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn scale(v: Vec3, s: f64) -> Vec3 {
    [v[0] * s, v[1] * s, v[2] * s]
}

fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm(v: Vec3) -> f64 {
    dot(v, v).sqrt()
}

fn normalize(v: Vec3) -> Vec3 {
    scale(v, 1.0 / norm(v))
}

fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

fn transpose(m: &Mat3) -> Mat3 {
    [
        [m[0][0], m[1][0], m[2][0]],
        [m[0][1], m[1][1], m[2][1]],
        [m[0][2], m[1][2], m[2][2]],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MotionClip;

    fn rest_clip(frames: usize) -> MotionClip {
        let sk = Skeleton::canonical();
        let pose = Pose::new(sk.rest_pose().to_vec()).unwrap();
        MotionClip::new(vec![pose; frames], 25.0).unwrap()
    }

    #[test]
    fn motion_json_round_trip_is_bit_exact() {
        let sk = Skeleton::canonical();
        let mut frames = Vec::new();
        for t in 0..7 {
            let mut joints = sk.rest_pose().to_vec();
            joints[sk.r_wrist()][0] += 0.1 + 0.2 * t as f64; // awkward decimals
            joints[sk.r_wrist()][1] += 1.0 / 3.0;
            frames.push(Pose::new(joints).unwrap());
        }
        let clip =
            MotionClip::with_keyframes(frames, 25.0, Some(vec![2, 5])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("clip.json");
        save_motion_json(&path, &clip, &sk).unwrap();
        let (back, names) = load_motion_json(&path).unwrap();
        assert_eq!(back, clip);
        assert_eq!(names, sk.joint_names());
    }

    #[test]
    fn ragged_document_is_rejected() {
        let doc = MotionDocument {
            fps: 25.0,
            joint_names: vec!["neck".into(), "head".into()],
            frames: vec![vec![[0.0; 3], [0.0; 3]], vec![[0.0; 3]]],
            keyframes: vec![],
        };
        assert!(doc.into_clip().is_err());
    }

    #[test]
    fn bvh_header_and_frame_shape() {
        let clip = rest_clip(5);
        let text = write_bvh(&clip, &Skeleton::canonical()).unwrap();
        assert!(text.starts_with("HIERARCHY\nROOT neck\n"));
        assert!(text.contains("Frames: 5\n"));
        assert!(text.contains("Frame Time: 0.040000\n"));
        let motion: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("Frame Time"))
            .skip(1)
            .collect();
        assert_eq!(motion.len(), 5);
        for line in motion {
            assert_eq!(line.split_whitespace().count(), 21);
        }
    }

    #[test]
    fn rest_pose_exports_zero_rotations() {
        let clip = rest_clip(3);
        let text = write_bvh(&clip, &Skeleton::canonical()).unwrap();
        let line = text.lines().last().unwrap();
        let values: Vec<f64> =
            line.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(&values[..3], &[0.0, 0.0, 0.0]); // neck position
        for v in &values[3..] {
            assert!(v.abs() < 1e-9, "expected zero rotation, got {v}");
        }
    }

    fn rot_z(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
    }

    fn rot_x(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
    }

    fn rot_y(deg: f64) -> Mat3 {
        let (s, c) = deg.to_radians().sin_cos();
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
    }

    fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        out
    }

    /// Reconstructing arm joints from the exported angles and offsets must
    /// reproduce a rigid-armed clip.
    #[test]
    fn forward_kinematics_reproduces_rigid_arm_motion() {
        let sk = Skeleton::canonical();
        let rest = sk.rest_pose().to_vec();
        let r_sh = rest[sk.r_shoulder()];
        let upper = sub(rest[sk.index_of("r_elbow").unwrap()], r_sh);
        let fore = sub(rest[sk.r_wrist()], rest[sk.index_of("r_elbow").unwrap()]);

        let mut frames = Vec::new();
        for t in 0..12 {
            let swing = rot_z(8.0 * t as f64);
            let bend = mat_mul(&swing, &rot_x(-6.0 * t as f64));
            let mut joints = rest.clone();
            let elbow = add(r_sh, mat_vec(&swing, upper));
            joints[sk.index_of("r_elbow").unwrap()] = elbow;
            joints[sk.r_wrist()] = add(elbow, mat_vec(&bend, fore));
            frames.push(Pose::new(joints).unwrap());
        }
        let clip = MotionClip::new(frames, 25.0).unwrap();
        let text = write_bvh(&clip, &sk).unwrap();

        // Offsets appear in hierarchy order; index 3..=5 are the right arm.
        let offsets: Vec<Vec3> = text
            .lines()
            .filter(|l| l.trim_start().starts_with("OFFSET"))
            .map(|l| {
                let v: Vec<f64> = l
                    .split_whitespace()
                    .skip(1)
                    .map(|x| x.parse().unwrap())
                    .collect();
                [v[0], v[1], v[2]]
            })
            .collect();
        assert_eq!(offsets.len(), 9);
        let (off_sh, off_el, off_wr) = (offsets[3], offsets[4], offsets[5]);

        let motion: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("Frame Time"))
            .skip(1)
            .collect();
        for (t, line) in motion.iter().enumerate() {
            let v: Vec<f64> = line.split_whitespace().map(|x| x.parse().unwrap()).collect();
            let root = [v[0], v[1], v[2]];
            let r_s = mat_mul(&mat_mul(&rot_z(v[9]), &rot_x(v[10])), &rot_y(v[11]));
            let r_e = mat_mul(&mat_mul(&rot_z(v[12]), &rot_x(v[13])), &rot_y(v[14]));
            let sh = add(root, off_sh);
            let el = add(sh, mat_vec(&r_s, off_el));
            let wr = add(el, mat_vec(&mat_mul(&r_s, &r_e), off_wr));

            let truth = clip.frames()[t].joints();
            let d_el = norm(sub(el, truth[sk.index_of("r_elbow").unwrap()]));
            let d_wr = norm(sub(wr, truth[sk.r_wrist()]));
            assert!(d_el < 1e-4, "frame {t}: elbow off by {d_el}");
            assert!(d_wr < 1e-4, "frame {t}: wrist off by {d_wr}");
        }
    }

    #[test]
    fn rotation_from_to_handles_edge_cases() {
        let a = [0.0, -1.0, 0.0];
        assert_eq!(rotation_from_to(a, a), identity());
        // Antiparallel: result must still map a onto -a.
        let r = rotation_from_to(a, [0.0, 1.0, 0.0]);
        let mapped = mat_vec(&r, a);
        assert!(norm(sub(mapped, [0.0, 1.0, 0.0])) < 1e-12);
        // Orthonormality of the general case.
        let r = rotation_from_to(normalize([1.0, 2.0, -0.5]), normalize([-0.3, 0.4, 1.0]));
        let rt_r = mat_mul(&transpose(&r), &r);
        for (i, row) in rt_r.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn euler_round_trips_through_rebuild() {
        let cases = [
            (10.0, 20.0, 30.0),
            (-45.0, 5.0, 170.0),
            (0.0, 89.9, 0.0),
            (120.0, -60.0, -120.0),
        ];
        for (z, x, y) in cases {
            let r = mat_mul(&mat_mul(&rot_z(z), &rot_x(x)), &rot_y(y));
            let (z2, x2, y2) = euler_zxy_degrees(&r);
            let r2 = mat_mul(&mat_mul(&rot_z(z2), &rot_x(x2)), &rot_y(y2));
            for i in 0..3 {
                for j in 0..3 {
                    assert!(
                        (r[i][j] - r2[i][j]).abs() < 1e-9,
                        "case {z}/{x}/{y} rebuilt badly at {i}{j}"
                    );
                }
            }
        }
    }
}
