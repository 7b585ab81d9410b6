//! Registry of regression targets understood by the dataset readers.

/// A named scalar property with its storage and reporting units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Property {
    pub name: &'static str,
    pub description: &'static str,
    /// Unit in which values are stored on records.
    pub unit: &'static str,
    /// Unit used when reporting errors.
    pub report_unit: &'static str,
    /// Multiplier from `unit` to `report_unit`.
    pub report_scale: f64,
    /// Intensive quantities are regressed with a mean readout.
    pub intensive: bool,
}

const fn prop(
    name: &'static str,
    description: &'static str,
    unit: &'static str,
    report_unit: &'static str,
    report_scale: f64,
    intensive: bool,
) -> Property {
    Property {
        name,
        description,
        unit,
        report_unit,
        report_scale,
        intensive,
    }
}

pub const PROPERTIES: [Property; 13] = [
    prop("homo", "HOMO energy", "eV", "meV", 1000.0, true),
    prop("lumo", "LUMO energy", "eV", "meV", 1000.0, true),
    prop("gap", "LUMO-HOMO gap", "eV", "meV", 1000.0, true),
    prop("zpve", "zero point vibrational energy", "eV", "meV", 1000.0, true),
    prop("mu", "dipole moment", "Debye", "Debye", 1.0, true),
    prop("alpha", "isotropic polarizability", "Bohr^3", "Bohr^3", 1.0, true),
    prop("r2", "electronic spatial extent", "Bohr^2", "Bohr^2", 1.0, true),
    prop("U0", "internal energy at 0 K", "eV", "meV", 1000.0, false),
    prop("U", "internal energy at 298.15 K", "eV", "meV", 1000.0, false),
    prop("H", "enthalpy at 298.15 K", "eV", "meV", 1000.0, false),
    prop("G", "free energy at 298.15 K", "eV", "meV", 1000.0, false),
    prop("Cv", "heat capacity at 298.15 K", "cal/molK", "cal/molK", 1.0, false),
    prop(
        "formation_energy_per_atom",
        "formation energy per atom",
        "eV/atom",
        "meV/atom",
        1000.0,
        true,
    ),
];

pub fn lookup(name: &str) -> Option<&'static Property> {
    PROPERTIES.iter().find(|p| p.name == name)
}
