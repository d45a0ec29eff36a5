#!/usr/bin/env python3
"""
fluidbeam

Синтез диаграмм направленности для планарной fluid-антенны:
восстановление фазы желаемого луча, выбор активных портов с
ограничением минимального расстояния и сравнение с фиксированной решеткой.
"""

import asyncio
import logging
import sys

from console.cli import main
from fluidbeam.config import Config


def setup_logging():
    """Настройка системы логирования"""
    logging.basicConfig(
        level=getattr(logging, Config.LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(Config.LOG_FILE, encoding='utf-8')
        ]
    )


def check_python_version():
    """Проверка версии Python"""
    if sys.version_info < (3, 9):
        print("❌ Требуется Python 3.9 или выше")
        print(f"   Текущая версия: {sys.version}")
        sys.exit(1)


def print_startup_info():
    """Вывод информации о запуске"""
    print("🚀 Запуск fluidbeam...")
    print(f"🐍 Python: {sys.version.split()[0]}")
    print(f"📝 Логи сохраняются в: {Config.LOG_FILE}")
    print()


if __name__ == "__main__":
    check_python_version()
    setup_logging()
    print_startup_info()

    try:
        sys.exit(asyncio.run(main(sys.argv[1:])))
    except KeyboardInterrupt:
        print("\n👋 Программа завершена пользователем")
        sys.exit(130)
    except Exception as e:
        logging.error(f"Критическая ошибка при запуске: {e}")
        print(f"\n💥 Критическая ошибка: {e}")
        sys.exit(1)
