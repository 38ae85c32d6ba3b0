"""Scripted three-frame detector blackout, with and without radar association."""

from radarmot.experiments import blackout_experiment


def main():
    for radar_assoc in (True, False):
        r = blackout_experiment(radar_assoc=radar_assoc)
        label = "with radar assoc" if radar_assoc else "without radar assoc"
        print(f"{label:<22} survived={r.survived}  radar frames={r.radar_frames}  track ids={r.track_ids}")


if __name__ == "__main__":
    main()
