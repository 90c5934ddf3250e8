"""
motionmod - 可变形运动调制（DMM）双向循环视频生成
"""

__version__ = "0.1.0"
__description__ = "Deformable Motion Modulation video generator on a NumPy autograd core"
