use super::config::ScenarioConfig;
use super::metrics::MetricsReport;
use super::{run, HarnessError};

pub const MAX_GRID_CELLS: u128 = 4096;

/// Expands `grid` over `base`. Axes follow [`ScenarioConfig::FIELDS`] order
/// with the last axis varying fastest, independent of key order in the file.
pub fn expand_grid(
    base: &ScenarioConfig,
    grid: &toml::Table,
) -> Result<Vec<ScenarioConfig>, HarnessError> {
    if let Some(unknown) = grid
        .keys()
        .find(|k| !ScenarioConfig::FIELDS.contains(&k.as_str()))
    {
        return Err(HarnessError::Config(format!("unknown grid parameter {unknown:?}")));
    }
    let mut axes: Vec<(&str, &Vec<toml::Value>)> = Vec::new();
    for name in ScenarioConfig::FIELDS {
        if let Some(value) = grid.get(name) {
            let values = value.as_array().ok_or_else(|| {
                HarnessError::Config(format!("grid parameter {name} must be an array"))
            })?;
            axes.push((name, values));
        }
    }
    let cells = axes
        .iter()
        .try_fold(1u128, |acc, (_, v)| acc.checked_mul(v.len() as u128))
        .unwrap_or(u128::MAX);
    if cells > MAX_GRID_CELLS {
        return Err(HarnessError::GridTooLarge {
            cells,
            max: MAX_GRID_CELLS,
        });
    }

    let base_table = toml::Table::try_from(base)
        .map_err(|e| HarnessError::Config(format!("cannot encode base scenario: {e}")))?;
    let mut out = Vec::with_capacity(cells as usize);
    let mut index = vec![0usize; axes.len()];
    for _ in 0..cells {
        let mut table = base_table.clone();
        for ((name, values), &i) in axes.iter().zip(&index) {
            table.insert((*name).to_string(), values[i].clone());
        }
        let cfg: ScenarioConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("grid cell: {e}")))?;
        cfg.validate()?;
        out.push(cfg);
        for axis in (0..axes.len()).rev() {
            index[axis] += 1;
            if index[axis] < axes[axis].1.len() {
                break;
            }
            index[axis] = 0;
        }
    }
    Ok(out)
}

/// One report per grid cell, in [`expand_grid`] order.
pub fn sweep(
    base: &ScenarioConfig,
    grid: &toml::Table,
) -> Result<Vec<(ScenarioConfig, MetricsReport)>, HarnessError> {
    expand_grid(base, grid)?
        .into_iter()
        .map(|cfg| run(&cfg).map(|report| (cfg, report)))
        .collect()
}
