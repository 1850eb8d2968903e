use super::vec3::{self, Mat3, Vec3};

/// Rotation taking `receiver` to latitude 0, longitude 0: first an azimuthal
/// turn about the polar axis, then a polar turn about the y axis.
pub fn receiver_frame(receiver: &Vec3) -> Mat3 {
    let lon = receiver[1].atan2(receiver[0]);
    let azimuthal = vec3::rot_z(-lon);
    let turned = vec3::mat_vec(&azimuthal, receiver);
    let lat = turned[2].atan2(turned[0]);
    let polar = vec3::rot_y(lat);
    vec3::mat_mul(&polar, &azimuthal)
}

/// Edge feature vector `(|s - r|, R(s - r)) / scale` where `R` is the
/// receiver's local frame.
pub fn edge_features(sender: &Vec3, receiver: &Vec3, scale: f64) -> [f64; 4] {
    let frame = receiver_frame(receiver);
    let delta = vec3::sub(&vec3::mat_vec(&frame, sender), &vec3::mat_vec(&frame, receiver));
    let length = vec3::norm(&delta);
    [
        length / scale,
        delta[0] / scale,
        delta[1] / scale,
        delta[2] / scale,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::vec3::from_lat_lon_deg;

    #[test]
    fn identity_frame_at_origin() {
        let r = [1.0, 0.0, 0.0];
        let s = from_lat_lon_deg(10.0, 20.0);
        let f = edge_features(&s, &r, 1.0);
        let raw = vec3::sub(&s, &r);
        for k in 0..3 {
            assert!((f[k + 1] - raw[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn coincident_nodes_give_zero() {
        let p = from_lat_lon_deg(-33.0, 151.0);
        assert_eq!(edge_features(&p, &p, 0.3), [0.0; 4]);
    }

    #[test]
    fn antipodal_on_equator() {
        let r = from_lat_lon_deg(0.0, 70.0);
        let s = from_lat_lon_deg(0.0, -110.0);
        let f = edge_features(&s, &r, 2.0);
        assert!((f[0] - 1.0).abs() < 1e-12);
        let disp = (f[1] * f[1] + f[2] * f[2] + f[3] * f[3]).sqrt();
        assert!((disp - 1.0).abs() < 1e-12);
        assert!((f[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn frame_maps_receiver_to_origin_and_is_proper() {
        for &(lat, lon) in &[(0.0, 0.0), (45.0, 30.0), (-89.9, -170.0), (90.0, 0.0), (12.5, 180.0)] {
            let r = from_lat_lon_deg(lat, lon);
            let m = receiver_frame(&r);
            let mapped = vec3::mat_vec(&m, &r);
            assert!((mapped[0] - 1.0).abs() < 1e-10);
            assert!(mapped[1].abs() < 1e-10 && mapped[2].abs() < 1e-10);
            assert!((vec3::determinant(&m) - 1.0).abs() < 1e-10);
        }
    }
}
