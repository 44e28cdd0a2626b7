//! Converts object distances into image-side defocus with the thin-lens
//! equation and builds a defocus map for a tilted plane.

use psfnet::render::{defocus_from_depth, image_distance, DefocusMap};

fn main() -> psfnet::Result<()> {
    let f = 6.0;
    println!("i(2f) = {} mm", image_distance(2.0 * f, f)?);
    for focus in [f64::INFINITY, 2_000.0, 500.0] {
        print!("focus {focus:>8} mm:");
        for object in [100.0, 500.0, 2_000.0, 10_000.0, f64::INFINITY] {
            print!("  {object}: {:+.2} um", defocus_from_depth(object, f, focus)?);
        }
        println!();
    }

    // A floor receding from 0.3 m at the bottom row to 20 m at the top, focused at 1 m.
    let (w, h) = (64, 48);
    let mut dz = Vec::with_capacity(w * h);
    for y in 0..h {
        let distance = 300.0 + (20_000.0 - 300.0) * (h - 1 - y) as f64 / (h - 1) as f64;
        let v = defocus_from_depth(distance, f, 1_000.0)?;
        dz.extend(std::iter::repeat(v).take(w));
    }
    let map = DefocusMap::new(w, h, dz)?;
    println!("defocus map: top row {:+.2} um, bottom row {:+.2} um", map.get(0, 0), map.get(0, h - 1));
    Ok(())
}
