import sys
from otfs_noma.simulation import SimConfig, sweep, export_results

# 4-QAM, 200 km/h, both detectors
cfg4 = SimConfig(qam_order_1=4, qam_order_2=4, speed_kmh=200.0, trials=100, seed=101)
r4 = sweep(cfg4, "snr", [6, 8, 10, 12, 14, 16, 18, 20, 25, 30])
export_results(r4, "/root/pkg/pilot/pilot_qam4.csv")
print("qam4 done", flush=True)

cfg16 = SimConfig(qam_order_1=16, qam_order_2=16, speed_kmh=200.0, trials=100, seed=102)
r16 = sweep(cfg16, "snr", [10, 12, 14, 16, 18, 20, 22, 24, 28, 32])
export_results(r16, "/root/pkg/pilot/pilot_qam16.csv")
print("qam16 done", flush=True)
