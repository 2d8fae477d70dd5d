use super::FormatError;

const RECORD_BYTES: usize = 16;

/// LiDAR returns in the sensor frame. Each point is `[x, y, z, reflectance]`,
/// kept as `f32` so that files round-trip bit-exactly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f32; 4]>,
}

impl PointCloud {
    pub fn new(points: Vec<[f32; 4]>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Coordinates of point `i` widened to `f64`.
    pub fn xyz(&self, i: usize) -> [f64; 3] {
        let p = self.points[i];
        [p[0] as f64, p[1] as f64, p[2] as f64]
    }

    pub fn reflectance(&self, i: usize) -> f64 {
        self.points[i][3] as f64
    }
}

/// Decode a velodyne `.bin` buffer: little-endian `f32 x4` per point.
pub fn parse_point_cloud(bytes: &[u8]) -> Result<PointCloud, FormatError> {
    if bytes.len() % RECORD_BYTES != 0 {
        return Err(FormatError::TruncatedRecord { len: bytes.len() });
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD_BYTES);
    for (index, record) in bytes.chunks_exact(RECORD_BYTES).enumerate() {
        let mut p = [0f32; 4];
        for (k, chunk) in record.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
            if !v.is_finite() {
                return Err(FormatError::NonFiniteValue { index });
            }
            p[k] = v;
        }
        points.push(p);
    }
    Ok(PointCloud { points })
}

pub fn write_point_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * RECORD_BYTES);
    for p in &cloud.points {
        for v in p {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_buffer_is_empty_cloud() {
        assert!(parse_point_cloud(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_record_decodes() {
        // Reference encoding built independently of `write_point_cloud`.
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_bits().to_le_bytes());
        }
        let cloud = parse_point_cloud(&bytes).unwrap();
        assert_eq!(cloud.points, vec![[1.0, 2.0, 3.0, 0.5]]);
    }

    #[test]
    fn ragged_length_is_rejected() {
        assert!(matches!(
            parse_point_cloud(&[0u8; 33]),
            Err(FormatError::TruncatedRecord { len: 33 })
        ));
    }

    #[test]
    fn nan_is_rejected() {
        let mut bytes = vec![0u8; 32];
        bytes[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            parse_point_cloud(&bytes),
            Err(FormatError::NonFiniteValue { index: 1 })
        ));
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            pts in prop::collection::vec(prop::array::uniform4(-100f32..100f32), 0..64)
        ) {
            let cloud = PointCloud::new(pts);
            prop_assert_eq!(parse_point_cloud(&write_point_cloud(&cloud)).unwrap(), cloud);
        }
    }
}
