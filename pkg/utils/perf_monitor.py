"""
Замер времени и памяти текущего процесса во время тяжелых стадий
"""

import logging
import threading
import time
from typing import Dict

import psutil

logger = logging.getLogger(__name__)


class PerformanceMonitor:
    """Фоновый опрос RSS процесса через psutil"""

    def __init__(self, label: str, interval: float = 0.05):
        self.label = label
        self.interval = interval
        self.process = psutil.Process()
        self.monitoring = False
        self.memory_samples = []
        self.start_time = time.perf_counter()
        self.monitor_thread = None

    def start_monitoring(self):
        """Запуск мониторинга"""
        self.monitoring = True
        self.start_time = time.perf_counter()
        self.memory_samples = [self._rss_mb()]
        self.monitor_thread = threading.Thread(target=self._monitor_loop, daemon=True)
        self.monitor_thread.start()

    def stop_monitoring(self) -> Dict:
        """Остановка мониторинга и получение результатов"""
        self.monitoring = False
        if self.monitor_thread:
            self.monitor_thread.join(timeout=2.0)
        self.memory_samples.append(self._rss_mb())

        result = {
            'label': self.label,
            'duration': time.perf_counter() - self.start_time,
            'start_memory_mb': self.memory_samples[0],
            'peak_memory_mb': max(self.memory_samples),
            'samples': len(self.memory_samples),
        }
        logger.info(
            f"⏱️  {self.label}: {result['duration']:.2f}с, "
            f"пик памяти {result['peak_memory_mb']:.1f}MB"
        )
        return result

    def __enter__(self) -> "PerformanceMonitor":
        self.start_monitoring()
        return self

    def __exit__(self, *exc):
        self.result = self.stop_monitoring()
        return False

    def _rss_mb(self) -> float:
        return self.process.memory_info().rss / 1024 / 1024

    def _monitor_loop(self):
        """Цикл мониторинга"""
        while self.monitoring:
            try:
                self.memory_samples.append(self._rss_mb())
            except (psutil.NoSuchProcess, psutil.AccessDenied) as e:
                logger.error(f"Ошибка мониторинга: {e}")
                break
            time.sleep(self.interval)
