use super::model::GlobalModel;
use super::train::LocalUpdate;
use crate::error::{Error, Result};

/// FedAvg: the dataset-size weighted mean of the updates. The result takes
/// the dims of `global` and its version plus one. Updates are summed in the
/// given order.
pub fn fedavg_aggregate(global: &GlobalModel, updates: &[LocalUpdate]) -> Result<GlobalModel> {
    if updates.is_empty() {
        return Err(Error::NoData("nothing to aggregate".into()));
    }
    let expected = global.dims.param_count();
    let mut total = 0usize;
    for u in updates {
        if u.params.len() != expected {
            return Err(Error::ShapeMismatch { expected, got: u.params.len() });
        }
        if u.dataset_size == 0 {
            return Err(Error::InvalidInput(format!("device {} reported an empty dataset", u.device_id)));
        }
        total += u.dataset_size;
    }
    let mut params = vec![0.0; expected];
    for u in updates {
        let weight = u.dataset_size as f64 / total as f64;
        for (p, v) in params.iter_mut().zip(&u.params) {
            *p += weight * v;
        }
    }
    GlobalModel::from_params(global.dims, params, global.version + 1)
}
