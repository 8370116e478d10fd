use super::{BitMask, CorpusError};

/// Rasterizes a closed polygon with the even-odd rule.
///
/// Pixel `(x, y)` is set iff its center `(x + 0.5, y + 0.5)` is inside the
/// polygon. Along each pixel-center scanline, a center is inside when an odd
/// number of polygon edges cross the scanline strictly to its right.
pub fn rasterize_polygon(points: &[[f64; 2]], width: u32, height: u32) -> Result<BitMask, CorpusError> {
    if points.len() < 3 {
        return Err(CorpusError::Decode(format!(
            "polygon needs at least 3 vertices, got {}",
            points.len()
        )));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(CorpusError::Decode("polygon has non-finite coordinates".into()));
    }
    if all_collinear(points) {
        return Err(CorpusError::Decode("polygon is degenerate (collinear vertices)".into()));
    }

    let mut mask = BitMask::new(width, height);
    let mut crossings: Vec<f64> = Vec::new();
    for y in 0..height {
        let cy = f64::from(y) + 0.5;
        crossings.clear();
        for (a, b) in points.iter().zip(points.iter().cycle().skip(1)) {
            // Half-open rule so vertices on the scanline are counted once.
            if (a[1] > cy) != (b[1] > cy) {
                crossings.push(a[0] + (cy - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
            }
        }
        if crossings.is_empty() {
            continue;
        }
        crossings.sort_by(f64::total_cmp);
        for x in 0..width {
            let cx = f64::from(x) + 0.5;
            let right = crossings.len() - crossings.partition_point(|&c| c <= cx);
            if right % 2 == 1 {
                mask.set(x, y, true);
            }
        }
    }
    Ok(mask)
}

fn all_collinear(points: &[[f64; 2]]) -> bool {
    let a = points[0];
    let Some(b) = points.iter().find(|p| (p[0] - a[0]).hypot(p[1] - a[1]) > 1e-12) else {
        return true;
    };
    points.iter().all(|p| {
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        cross.abs() < 1e-12
    })
}
