#include "agc/config.hpp"

namespace agc {

// Two control areas, each with one reheat-thermal and one hydro unit,
// joined by a single tie line. The physical constants are desk-scale
// defaults drawn from the ranges used in classical load-frequency-control
// studies; they are not calibrated to any particular plant.
const std::string& defaultConfigJson() {
    static const std::string kJson = R"JSON({
  "plant": {
    "areas": [
      {
        "name": "a1",
        "inertia_gain_hz_per_pu": 50.0,
        "inertia_t_s": 12.0,
        "freq_bias_pu_per_hz": 0.6367,
        "generators": [
          {
            "name": "thermal",
            "kind": "thermal_reheat",
            "droop_hz_per_pu": 2.4,
            "governor_s": 0.08,
            "turbine_s": 0.3,
            "reheat_gain": 0.3,
            "reheat_s": 10.0
          },
          {
            "name": "hydro",
            "kind": "hydro",
            "droop_hz_per_pu": 5.0,
            "servo_s": 0.2,
            "reset_zero_s": 3.0,
            "droop_pole_s": 15.0,
            "water_s": 1.0
          }
        ]
      },
      {
        "name": "a2",
        "inertia_gain_hz_per_pu": 50.0,
        "inertia_t_s": 12.0,
        "freq_bias_pu_per_hz": 0.6367,
        "generators": [
          {
            "name": "thermal",
            "kind": "thermal_reheat",
            "droop_hz_per_pu": 2.4,
            "governor_s": 0.08,
            "turbine_s": 0.3,
            "reheat_gain": 0.3,
            "reheat_s": 10.0
          },
          {
            "name": "hydro",
            "kind": "hydro",
            "droop_hz_per_pu": 5.0,
            "servo_s": 0.2,
            "reset_zero_s": 3.0,
            "droop_pole_s": 15.0,
            "water_s": 1.0
          }
        ]
      }
    ],
    "tie_lines": [
      { "from_area": 0, "to_area": 1, "sync_pu_per_rad": 0.0577 }
    ]
  },
  "safety": {
    "f_max_hz": 0.4,
    "alpha": [1.0, 1.0],
    "ts_pred_s": 0.5,
    "mode": "flag",
    "include_load_in_bdot": true,
    "rectifiable": [true, false, true, false]
  },
  "reward": {
    "r1": [2.0, 2.0],
    "r2": 40.0,
    "r3": 25.0,
    "r4": 15.0,
    "r5": 200.0,
    "r6": 1e5,
    "dispatch_delta_penalty": false
  },
  "pi": {
    "gains": [
      { "kp": 0.0, "ki": 0.08 },
      { "kp": 0.0, "ki": 0.08 }
    ],
    "participation": [
      [0.6, 0.4],
      [0.6, 0.4]
    ]
  },
  "agent": {
    "hidden": [64, 64],
    "action_limit_pu": 0.1,
    "gamma": 0.95,
    "tau": 0.005,
    "actor_lr": 0.0001,
    "critic_lr": 0.001,
    "buffer_capacity": 200000,
    "batch_size": 64,
    "warmup_steps": 1000,
    "noise_sigma0": 0.3,
    "noise_sigma_final": 0.03,
    "noise_decay_episodes": 1500,
    "obs_tie_scale_pu": 0.1
  },
  "training": {
    "episode_s": 60.0,
    "agc_period_s": 2.0,
    "load_steps_min": 1,
    "load_steps_max": 3,
    "load_mag_pu": 0.05,
    "mode": "flag"
  },
  "scenario": {
    "duration_s": 60.0,
    "agc_period_s": 2.0,
    "mode": "rectify",
    "seed": 0,
    "load_schedule": [
      { "t_s": 1.0, "area": 0, "delta_pu": 0.05 }
    ]
  },
  "sim": {
    "rk4_dt_s": 0.001,
    "trace_sample_dt_s": 0.001
  }
}
)JSON";
    return kJson;
}

}  // namespace agc
