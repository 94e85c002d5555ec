//! Regenerates the shipped BVH fixtures from the synthetic clips.
//!
//! `cargo run -p emostage --example write_fixtures`

use std::path::Path;

use emostage::{bvh, synth};

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    std::fs::create_dir_all(&dir)?;
    for (name, clip) in [
        ("joy.bvh", synth::joy_clip()),
        ("surprise.bvh", synth::surprise_clip()),
        ("still.bvh", synth::still_clip(2.0)),
    ] {
        std::fs::write(dir.join(name), bvh::write(&clip))?;
    }
    let joy = bvh::write(&synth::joy_clip());
    let broken = &joy[..joy.find("MOTION").expect("writer emits MOTION")];
    std::fs::write(dir.join("broken.bvh"), broken)?;
    Ok(())
}
