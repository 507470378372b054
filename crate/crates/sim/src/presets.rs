//! Built-in scenarios, shipped as the same TOML a user would write.

pub struct Preset {
    pub name: &'static str,
    pub text: &'static str,
}

impl Preset {
    /// First comment line of the file.
    pub fn summary(&self) -> &'static str {
        self.text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix("# "))
            .unwrap_or("")
    }
}

macro_rules! preset {
    ($name:literal) => {
        Preset {
            name: $name,
            text: include_str!(concat!("../presets/", $name, ".toml")),
        }
    };
}

pub const PRESETS: [Preset; 9] = [
    preset!("free_chiral"),
    preset!("massive_plane_wave"),
    preset!("twisted_abelian"),
    preset!("thirring_massless"),
    preset!("thirring_massive"),
    preset!("dwm_geodesic"),
    preset!("dwm_uncoupled_exact"),
    preset!("dwm_random_smooth"),
    preset!("gronwall_pair"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// One line per preset: name and summary.
pub fn listing() -> String {
    PRESETS
        .iter()
        .map(|p| format!("{:<22} {}\n", p.name, p.summary()))
        .collect()
}
