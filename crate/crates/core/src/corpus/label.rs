use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The eight COICOP-mapped activity sectors, in canonical class order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SectorLabel {
    GasStations,
    PrivateTransport,
    PublicTransport,
    Flights,
    ParcelCourier,
    WaterBill,
    ElectricityBill,
    GasBill,
}

pub const N_SECTORS: usize = 8;

impl SectorLabel {
    pub const ALL: [SectorLabel; N_SECTORS] = [
        SectorLabel::GasStations,
        SectorLabel::PrivateTransport,
        SectorLabel::PublicTransport,
        SectorLabel::Flights,
        SectorLabel::ParcelCourier,
        SectorLabel::WaterBill,
        SectorLabel::ElectricityBill,
        SectorLabel::GasBill,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SectorLabel::GasStations => "gas_stations",
            SectorLabel::PrivateTransport => "private_transport",
            SectorLabel::PublicTransport => "public_transport",
            SectorLabel::Flights => "flights",
            SectorLabel::ParcelCourier => "parcel_courier",
            SectorLabel::WaterBill => "water_bill",
            SectorLabel::ElectricityBill => "electricity_bill",
            SectorLabel::GasBill => "gas_bill",
        }
    }

    pub fn coicop(self) -> &'static str {
        match self {
            SectorLabel::GasStations => "7.2",
            SectorLabel::PrivateTransport | SectorLabel::PublicTransport | SectorLabel::Flights => {
                "7.3"
            }
            SectorLabel::ParcelCourier => "8.1",
            SectorLabel::WaterBill => "4.4",
            SectorLabel::ElectricityBill | SectorLabel::GasBill => "4.5",
        }
    }

    /// Main category and subcategory, as shown to English readers.
    pub fn name_en(self) -> &'static str {
        match self {
            SectorLabel::GasStations => "car and transport - gas stations",
            SectorLabel::PrivateTransport => "car and transport - private transport",
            SectorLabel::PublicTransport => "car and transport - public transport",
            SectorLabel::Flights => "car and transport - flights",
            SectorLabel::ParcelCourier => "enterprise expenditures - parcel and courier",
            SectorLabel::WaterBill => "commodities - water bill",
            SectorLabel::ElectricityBill => "commodities - electricity bill",
            SectorLabel::GasBill => "commodities - gas bill",
        }
    }

    pub fn name_es(self) -> &'static str {
        match self {
            SectorLabel::GasStations => "automóvil y transporte - gasolineras",
            SectorLabel::PrivateTransport => "automóvil y transporte - transporte privado",
            SectorLabel::PublicTransport => "automóvil y transporte - transporte público",
            SectorLabel::Flights => "automóvil y transporte - vuelos",
            SectorLabel::ParcelCourier => "gastos de empresa - paquetería y mensajería",
            SectorLabel::WaterBill => "suministros - agua",
            SectorLabel::ElectricityBill => "suministros - electricidad",
            SectorLabel::GasBill => "suministros - gas",
        }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSector(pub String);

impl fmt::Display for UnknownSector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown sector {:?}", self.0)
    }
}

impl std::error::Error for UnknownSector {}

impl FromStr for SectorLabel {
    type Err = UnknownSector;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s.trim())
            .ok_or_else(|| UnknownSector(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip_and_coicop() {
        for (i, l) in SectorLabel::ALL.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(SectorLabel::from_index(i), Some(*l));
            assert_eq!(l.as_str().parse::<SectorLabel>().unwrap(), *l);
        }
        let codes: Vec<_> = SectorLabel::ALL.iter().map(|l| l.coicop()).collect();
        assert_eq!(codes, ["7.2", "7.3", "7.3", "7.3", "8.1", "4.4", "4.5", "4.5"]);
        assert!("comida".parse::<SectorLabel>().is_err());
        assert_eq!(SectorLabel::from_index(8), None);
    }
}
