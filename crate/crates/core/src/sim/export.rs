use std::io::Write;
use std::path::Path;

use crate::domain::Trajectory;
use crate::error::{Error, Result};

pub const TRAJECTORY_CSV_HEADER: [&str; 6] = ["t", "user", "action", "consumed", "reward", "stock_json"];

/// Writes one row per tuple: `t,user,action,consumed,reward,stock_json`,
/// with `consumed` as 0/1 and the pre-decision stock as a bracketed list.
pub fn write_trajectory_csv<W: Write>(trajectory: &Trajectory, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(TRAJECTORY_CSV_HEADER)?;
    for tuple in &trajectory.tuples {
        writer.write_record([
            tuple.t.to_string(),
            tuple.user.to_string(),
            tuple.action.to_string(),
            u8::from(tuple.consumed).to_string(),
            tuple.reward.to_string(),
            tuple.stock_before.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<trajectory>", e))?;
    Ok(())
}

pub fn trajectory_csv_string(trajectory: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    write_trajectory_csv(trajectory, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

impl Trajectory {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_trajectory_csv(self, std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{InventoryState, LoggedTuple};

    #[test]
    fn stock_column_is_quoted_list() {
        let traj = Trajectory {
            tuples: vec![LoggedTuple {
                t: 1,
                user: 2,
                action: 0,
                consumed: true,
                reward: 1.5,
                stock_before: InventoryState::new(vec![1, 0, 3]),
            }],
            realized_value: 1.5,
        };
        let text = trajectory_csv_string(&traj).unwrap();
        assert_eq!(text, "t,user,action,consumed,reward,stock_json\n1,2,0,1,1.5,\"[1,0,3]\"\n");
    }
}
